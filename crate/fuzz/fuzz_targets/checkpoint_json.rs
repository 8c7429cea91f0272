#![no_main]

use ici::stable_family::StableOperatorParams;
use libfuzzer_sys::fuzz_target;

// Anything the loader accepts must survive a save/load cycle unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(params) = StableOperatorParams::from_checkpoint_json(text) else { return };
    let saved = params.to_checkpoint_json();
    let again = StableOperatorParams::from_checkpoint_json(&saved).expect("saved checkpoint reloads");
    assert_eq!(again.to_checkpoint_json(), saved);
});
