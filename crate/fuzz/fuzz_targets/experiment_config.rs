#![no_main]

use ici::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_json(text) else { return };
    let saved = cfg.to_json();
    let again = ExperimentConfig::from_json(&saved).expect("saved config reloads");
    assert_eq!(again.to_json(), saved);
    // derived settings of a valid config are valid too
    cfg.train_config(0).validate().expect("train settings");
});
