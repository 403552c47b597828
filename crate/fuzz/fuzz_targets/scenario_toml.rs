#![no_main]

use dantzig::simulation::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = ScenarioConfig::from_toml_str(text) {
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).expect("serialized config must load");
        assert_eq!(back, cfg);
    }
});
