#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = advaudio::asr::decode_checkpoint(data) {
        let bytes = advaudio::asr::encode_checkpoint(&model).expect("re-encode");
        let back = advaudio::asr::decode_checkpoint(&bytes).expect("re-decode");
        assert_eq!(back.architecture(), model.architecture());
    }
});
