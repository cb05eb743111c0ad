#![no_main]

use advaudio::config::parse_pairs;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pairs) = parse_pairs(text) {
        for (k, _) in pairs {
            assert!(!k.is_empty());
        }
    }
});
