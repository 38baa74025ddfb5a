#![no_main]

use kslab_core::io::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::from_toml_str(text) {
        let again = RunConfig::from_toml_str(&config.to_toml_string()).expect("serialised config re-parses");
        assert_eq!(config.hash(), again.hash());
    }
});
