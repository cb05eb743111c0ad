#![no_main]

use advaudio::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        let again = RunConfig::parse(&cfg.to_text().expect("serialize")).expect("reparse");
        assert_eq!(again.to_text().expect("serialize"), cfg.to_text().expect("serialize"));
    }
});
