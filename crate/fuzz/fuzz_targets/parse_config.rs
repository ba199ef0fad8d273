#![no_main]

use libfuzzer_sys::fuzz_target;
use randsig::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text, None, false) {
        let _ = cfg.validate();
        if let Ok(echo) = cfg.to_toml_string() {
            let again = ExperimentConfig::from_toml_str(&echo, Some(cfg.experiment.preset), false).unwrap();
            assert_eq!(again, cfg);
        }
    }
});
