#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = advaudio::asr::parse_index(text) {
        for (_, transcript) in entries {
            assert!(!transcript.is_empty());
            assert_eq!(transcript.trim(), transcript);
        }
    }
});
