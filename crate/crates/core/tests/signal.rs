mod common;

use advaudio::dsp::{convolve, convolve_samples, wav, AudioClip};
use advaudio::rir::{generate_rir, sample_room, RoomRanges};
use rand::Rng;

#[test]
fn convolution_is_linear_on_room_responses() {
    let mut r = common::rng(51);
    for _ in 0..10 {
        let room = sample_room(&RoomRanges::default(), &mut r).unwrap();
        let taps = generate_rir(&room).unwrap().taps;
        let len = r.gen_range(500..6000);
        let a = common::noise(len, 1.0, &mut r);
        let b = common::noise(len, 1.0, &mut r);
        let c = r.gen_range(-3.0..3.0);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
        let (ca, cb) = (convolve_samples(&a, &taps).unwrap(), convolve_samples(&b, &taps).unwrap());
        let cs = convolve_samples(&sum, &taps).unwrap();
        let cc = convolve_samples(&scaled, &taps).unwrap();
        for i in 0..len {
            assert!((cs[i] - ca[i] - cb[i]).abs() < 1e-9);
            assert!((cc[i] - c * ca[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn convolution_keeps_length_and_direct_path_alignment() {
    let mut r = common::rng(52);
    let room = sample_room(&RoomRanges::default(), &mut r).unwrap();
    let rir = generate_rir(&room).unwrap();
    let clip = AudioClip::new(common::noise(4000, 0.5, &mut r), 16_000);
    let out = convolve(&clip, &rir).unwrap();
    assert_eq!(out.len(), clip.len());
    let lag = rir.first_nonzero().unwrap();
    assert!(out.samples[..lag].iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn wav_file_roundtrip_is_exact_after_quantization() {
    let dir = std::env::temp_dir().join(format!("advaudio-signal-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("clip.wav");
    let mut r = common::rng(53);
    let samples: Vec<f64> = (0..1000).map(|_| f64::from(wav::quantize(r.gen_range(-1.0..1.0))) / 32768.0).collect();
    let clip = AudioClip::new(samples, 16_000);
    wav::write(&path, &clip).unwrap();
    assert_eq!(wav::read(&path).unwrap(), clip);
    std::fs::remove_dir_all(&dir).unwrap();
}
