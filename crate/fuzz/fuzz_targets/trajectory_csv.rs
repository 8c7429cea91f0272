#![no_main]

use ici::ici::Trajectory;
use libfuzzer_sys::fuzz_target;

// First byte picks the channel counts, the rest is the file.
fuzz_target!(|data: &[u8]| {
    let Some((&dims, rest)) = data.split_first() else { return };
    let (du, dy) = (1 + (dims & 3) as usize, 1 + ((dims >> 2) & 3) as usize);
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let Ok(tr) = Trajectory::from_csv(text, du, dy) else { return };
    assert_eq!(tr.r.dim(), du);
    assert_eq!(tr.y.dim(), dy);
    let saved = tr.to_csv();
    let again = Trajectory::from_csv(&saved, du, dy).expect("saved trajectory reloads");
    assert_eq!(again.to_csv(), saved);
});
