//! Formant "letter-phone" synthesizer used as the bundled corpus.
//!
//! Every letter has a fixed spectral signature: voiced letters are harmonic
//! series shaped by two formants plus a fixed third, unvoiced letters are
//! band-passed noise. Speakers vary pitch, formant scale, rate and level.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Utterance;
use crate::dsp::AudioClip;
use crate::error::{Error, Result};

const VOICED: &str = "aeioulmnrwyvbdgj";
const UNVOICED: &str = "stfhkpczxq";
const F1: [f64; 4] = [300.0, 450.0, 620.0, 800.0];
const F2: [f64; 4] = [950.0, 1350.0, 1800.0, 2300.0];
const NOISE_CENTERS: [f64; 10] = [1500.0, 2000.0, 2500.0, 3000.0, 3500.0, 4000.0, 4600.0, 5200.0, 6000.0, 7000.0];

/// Digit words plus a small command and prose vocabulary.
pub const DEFAULT_WORDS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "please", "open", "the",
    "door", "it", "is", "manifest", "that", "man", "but", "bear", "maintained", "seat", "their", "assumed",
    "character", "changed", "with", "now", "had", "taken", "stop", "go", "left", "right", "up", "down", "on",
    "off", "yes", "no", "light", "call", "home", "turn", "music", "play", "a", "of", "we",
];

#[derive(Debug, Clone, Copy)]
enum Phone {
    Voiced { f1: f64, f2: f64 },
    Noise { center: f64 },
}

fn phone(c: char) -> Option<Phone> {
    if let Some(i) = VOICED.find(c) {
        return Some(Phone::Voiced { f1: F1[i / 4], f2: F2[i % 4] });
    }
    if let Some(i) = UNVOICED.find(c) {
        return Some(Phone::Noise { center: NOISE_CENTERS[i] });
    }
    // The apostrophe reuses a short low noise burst.
    (c == '\'').then_some(Phone::Noise { center: 1000.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Speaker {
    pub f0: f64,
    pub formant_scale: f64,
    /// Mean letter duration in seconds.
    pub letter_secs: f64,
    pub word_gap_secs: f64,
}

impl Speaker {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            f0: rng.gen_range(90.0..180.0),
            formant_scale: rng.gen_range(0.94..1.06),
            letter_secs: rng.gen_range(0.050..0.070),
            word_gap_secs: rng.gen_range(0.06..0.10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_clips: usize,
    pub seed: u64,
    pub sample_rate: u32,
    /// Rendered clips shorter than this are redrawn.
    pub min_secs: f64,
    pub max_secs: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub words: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clips: 400,
            seed: 7,
            sample_rate: 16_000,
            min_secs: 0.0,
            max_secs: 2.0,
            min_words: 1,
            max_words: 4,
            words: DEFAULT_WORDS.iter().map(|w| w.to_string()).collect(),
        }
    }
}

/// Resonance magnitude of a formant at `f`.
fn formant(f: f64, center: f64, bw: f64) -> f64 {
    1.0 / (1.0 + ((f - center) / bw).powi(2)).sqrt()
}

fn voiced(n: usize, sr: f64, f1: f64, f2: f64, sp: &Speaker, rng: &mut impl Rng) -> Vec<f64> {
    let s = sp.formant_scale;
    let (f1, f2, f3) = (f1 * s, f2 * s, 2700.0 * s);
    let f0 = sp.f0 * rng.gen_range(0.97..1.03);
    let mut out = vec![0.0; n];
    let mut k = 1;
    while k as f64 * f0 < 4500.0 {
        let f = k as f64 * f0;
        let amp = formant(f, f1, 90.0) + 0.7 * formant(f, f2, 120.0) + 0.25 * formant(f, f3, 200.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let w = 2.0 * PI * f / sr;
        for (i, o) in out.iter_mut().enumerate() {
            *o += amp * (w * i as f64 + phase).sin();
        }
        k += 1;
    }
    out
}

/// White noise through a two-pole band-pass (constant peak gain).
fn noise_band(n: usize, sr: f64, center: f64, rng: &mut impl Rng) -> Vec<f64> {
    let q = 4.0;
    let w0 = 2.0 * PI * center / sr;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    (0..n)
        .map(|_| {
            let x: f64 = normal.sample(rng);
            let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let r = crate::dsp::rms(x);
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / r);
    }
}

/// Raised-cosine fade in and out over `ramp` samples.
fn envelope(x: &mut [f64], ramp: usize) {
    let n = x.len();
    let ramp = ramp.min(n / 2);
    for i in 0..ramp {
        let g = 0.5 - 0.5 * (PI * (i as f64 + 0.5) / ramp as f64).cos();
        x[i] *= g;
        x[n - 1 - i] *= g;
    }
}

/// Renders `text` (lowercase words separated by spaces) for one speaker.
pub fn synthesize(text: &str, speaker: &Speaker, sample_rate: u32, rng: &mut impl Rng) -> Result<AudioClip> {
    let sr = sample_rate as f64;
    let secs = |s: f64| (s * sr).round() as usize;
    let mut out = vec![0.0; secs(rng.gen_range(0.04..0.12))];
    for (wi, word) in text.split_whitespace().enumerate() {
        if wi > 0 {
            out.extend(std::iter::repeat(0.0).take(secs(speaker.word_gap_secs * rng.gen_range(0.8..1.2))));
        }
        for (ci, c) in word.chars().enumerate() {
            let p = phone(c).ok_or(Error::UnknownCharacter(c))?;
            if ci > 0 {
                out.extend(std::iter::repeat(0.0).take(secs(rng.gen_range(0.012..0.020))));
            }
            let n = secs(speaker.letter_secs * rng.gen_range(0.85..1.15));
            let mut seg = match p {
                Phone::Voiced { f1, f2 } => voiced(n, sr, f1, f2, speaker, rng),
                Phone::Noise { center } => noise_band(n, sr, center * speaker.formant_scale, rng),
            };
            let level = match p {
                Phone::Voiced { .. } => 0.2,
                Phone::Noise { .. } => 0.1,
            };
            normalize_rms(&mut seg, level * 10f64.powf(rng.gen_range(-2.0..2.0) / 20.0));
            envelope(&mut seg, secs(0.008));
            out.extend(seg);
        }
    }
    out.extend(std::iter::repeat(0.0).take(secs(rng.gen_range(0.04..0.12))));
    let floor = Normal::new(0.0, 2e-4).expect("valid sigma");
    out.iter_mut().for_each(|v| *v += floor.sample(rng));
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = rng.gen_range(0.3..0.7) / peak;
    out.iter_mut().for_each(|v| *v *= gain);
    Ok(AudioClip::new(out, sample_rate))
}

/// Clips to attack: two or three words, none of them from the target phrases.
pub fn attack_corpus_config(n_clips: usize, seed: u64) -> SynthConfig {
    let banned: Vec<&str> = crate::eval::TARGETS.iter().flat_map(|t| t.split_whitespace()).collect();
    SynthConfig {
        n_clips,
        seed,
        min_secs: 1.0,
        max_secs: 1.6,
        min_words: 2,
        max_words: 3,
        words: DEFAULT_WORDS.iter().filter(|w| !banned.contains(w)).map(|w| w.to_string()).collect(),
        ..SynthConfig::default()
    }
}

/// Upper bound on rendered duration, used to keep phrases within the limit.
fn worst_case_secs(text: &str) -> f64 {
    let letters = text.chars().filter(|c| !c.is_whitespace()).count() as f64;
    let words = text.split_whitespace().count() as f64;
    0.24 + letters * 0.070 * 1.15 + (letters - words).max(0.0) * 0.020 + (words - 1.0).max(0.0) * 0.12
}

/// Random phrases drawn from the word list, each rendered by a random speaker.
pub fn synthetic_corpus(cfg: &SynthConfig) -> Result<Vec<Utterance>> {
    if cfg.words.is_empty() || cfg.min_words == 0 || cfg.max_words < cfg.min_words {
        return Err(Error::Config("synthetic corpus needs words and a valid word-count range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n_clips);
    while out.len() < cfg.n_clips {
        let n_words = rng.gen_range(cfg.min_words..=cfg.max_words);
        let text = (0..n_words)
            .map(|_| cfg.words.choose(&mut rng).expect("nonempty").as_str())
            .collect::<Vec<_>>()
            .join(" ");
        if worst_case_secs(&text) > cfg.max_secs {
            if n_words == cfg.min_words {
                return Err(Error::Config(format!("phrase '{text}' cannot fit in {} s", cfg.max_secs)));
            }
            continue;
        }
        let speaker = Speaker::random(&mut rng);
        let clip = synthesize(&text, &speaker, cfg.sample_rate, &mut rng)?;
        if clip.duration_secs() < cfg.min_secs {
            continue;
        }
        out.push(Utterance { id: format!("synth_{:05}", out.len()), text, clip });
    }
    Ok(out)
}
