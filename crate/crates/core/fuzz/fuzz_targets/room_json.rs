#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(room) = advaudio::rir::parse_room_json(data) {
        // Validated rooms must be renderable.
        let settings = advaudio::rir::RirSettings::default();
        if room.rt60 <= 0.8 && room.volume() < 1e4 {
            let rir = advaudio::rir::generate_rir_with(&room, &settings).expect("render");
            assert!(!rir.taps.is_empty());
        }
    }
});
