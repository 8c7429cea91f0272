#![no_main]

use ici::ici::DatasetMeta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(meta) = DatasetMeta::from_json(text) else { return };
    let saved = serde_json::to_string_pretty(&meta).unwrap();
    let again = DatasetMeta::from_json(&saved).expect("saved meta reloads");
    assert_eq!(serde_json::to_string_pretty(&again).unwrap(), saved);
});
