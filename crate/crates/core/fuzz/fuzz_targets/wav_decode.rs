#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = advaudio::dsp::wav::decode_bytes(data) {
        // Anything that decodes must re-encode and decode to the same samples.
        let bytes = advaudio::dsp::wav::encode_bytes(&clip).expect("re-encode");
        let back = advaudio::dsp::wav::decode_bytes(&bytes).expect("re-decode");
        assert_eq!(back, clip);
    }
});
