//! Oracle checks shared by the per-module suites and the acceptance target.
//! Each check returns `Ok(detail)` on success and `Err(detail)` otherwise.
#![allow(dead_code)]

use advaudio::asr::{ctc_loss, ctc_loss_grad, Architecture, Logits, TranscriptionTarget, VictimModel, Vocabulary};
use advaudio::attack::{compound_loss, draw_transforms, AttackConfig, AttackContext, Variant};
use advaudio::dsp::{AudioClip, FeatureConfig, MfccExtractor};
use advaudio::eval::{wer, word_errors};
use advaudio::psycho::{perceptual_loss, perceptual_loss_grad, MaskingThresholdGrid, PsychoConfig};
use advaudio::rir::{RirPool, RirSettings, RoomRanges};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Outcome = std::result::Result<String, String>;

pub const CTC_TOL: f64 = 1e-10;
pub const MFCC_GRAD_TOL: f64 = 1e-4;
pub const CTC_GRAD_TOL: f64 = 1e-4;
pub const NET_GRAD_TOL: f64 = 1e-3;
pub const PERCEPTUAL_GRAD_TOL: f64 = 1e-3;
pub const PIPELINE_GRAD_TOL: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative error with a floor on the denominator, so coordinates whose
/// gradient is numerically zero are judged on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn central_difference(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] -= 2.0 * h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// Worst relative error over `coords`; the floor is `floor_frac` of the
/// largest analytic magnitude among them.
pub fn worst_fd_error(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    grad: &[f64],
    coords: &[usize],
    h: f64,
    floor_frac: f64,
) -> f64 {
    let scale = coords.iter().map(|&i| grad[i].abs()).fold(0.0, f64::max);
    coords
        .iter()
        .map(|&i| rel_err(grad[i], central_difference(&mut f, x, i, h), floor_frac * scale))
        .fold(0.0, f64::max)
}

pub fn noise(len: usize, amp: f64, r: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| r.gen_range(-amp..amp)).collect()
}

/// A few harmonics plus noise, loud enough to have a meaningful masking threshold.
pub fn tonal_clip(len: usize, r: &mut impl Rng) -> AudioClip {
    let f0 = r.gen_range(100.0..300.0);
    let samples = (0..len)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            (1..6).map(|k| (2.0 * std::f64::consts::PI * f0 * k as f64 * t).sin() * 0.3 / k as f64).sum::<f64>()
                + r.gen_range(-0.01..0.01)
        })
        .collect();
    AudioClip::new(samples, 16_000)
}

fn abc_vocab() -> Vocabulary {
    Vocabulary::new(vec!['a', 'b', 'c']).unwrap()
}

/// Sum over every frame-level path whose collapse equals the target.
fn ctc_by_enumeration(logits: &Logits, target: &[usize]) -> f64 {
    let lp = logits.log_softmax();
    let (t_len, v) = (logits.n_frames, logits.n_classes);
    let mut total = 0.0;
    let mut path = vec![0usize; t_len];
    for code in 0..v.pow(t_len as u32) {
        let mut c = code;
        for p in path.iter_mut() {
            *p = c % v;
            c /= v;
        }
        if advaudio::asr::collapse(&path) == target {
            total += path.iter().enumerate().map(|(t, &k)| lp[t * v + k]).sum::<f64>().exp();
        }
    }
    -total.ln()
}

pub fn ctc_exhaustive() -> Outcome {
    let vocab = abc_vocab();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for frames in 1..=6usize {
        for tokens in 0..=3usize {
            for _ in 0..8 {
                let text: String = (0..tokens).map(|_| *['a', 'b', 'c'].choose(&mut r).unwrap()).collect();
                let target = TranscriptionTarget::new(&text, &vocab).unwrap();
                if target.min_frames() > frames {
                    continue;
                }
                let data = (0..frames * vocab.size()).map(|_| r.gen_range(-3.0..3.0)).collect();
                let logits = Logits::new(frames, vocab.size(), data);
                let fast = ctc_loss(&logits, &target).map_err(|e| e.to_string())?;
                let slow = ctc_by_enumeration(&logits, &target.token_ids);
                worst = worst.max((fast - slow).abs());
                cases += 1;
            }
        }
    }
    let msg = format!("{cases} cases, max |loss - enumeration| = {worst:.2e} (tol {CTC_TOL:.0e})");
    if worst <= CTC_TOL { Ok(msg) } else { Err(msg) }
}

fn naive_levenshtein(a: &[&str], b: &[&str]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = naive_levenshtein(ra, rb) + usize::from(x != y);
            sub.min(naive_levenshtein(ra, b) + 1).min(naive_levenshtein(a, rb) + 1)
        }
    }
}

pub fn wer_bruteforce() -> Outcome {
    let pool = ["go", "stop", "left", "right"];
    let mut r = rng(202);
    for case in 0..1000 {
        let n = r.gen_range(1..=8);
        let m = r.gen_range(0..=8);
        let a: Vec<&str> = (0..n).map(|_| *pool.choose(&mut r).unwrap()).collect();
        let b: Vec<&str> = (0..m).map(|_| *pool.choose(&mut r).unwrap()).collect();
        let expect = naive_levenshtein(&a, &b);
        let got = word_errors(&a, &b);
        let w = wer(&a, &b).map_err(|e| e.to_string())?;
        if got != expect || (w - 100.0 * expect as f64 / n as f64).abs() > 1e-12 {
            return Err(format!("pair {case}: {a:?} vs {b:?}: got {got}, brute force {expect}"));
        }
    }
    Ok("1000 pairs agree with exhaustive Levenshtein".into())
}

/// Random linear functional of the MFCC matrix on 100 short random clips.
pub fn mfcc_gradient() -> Outcome {
    let ex = MfccExtractor::new(FeatureConfig::default()).unwrap();
    let mut r = rng(303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let len = r.gen_range(400..1200);
        let x = noise(len, 0.5, &mut r);
        let (f0, cache) = ex.forward(&x).unwrap();
        let weights = noise(f0.data.len(), 1.0, &mut r);
        let grad = ex.backward(&cache, &weights);
        let functional = |s: &[f64]| {
            let f = ex.forward(s).unwrap().0;
            f.data.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
        };
        let coords: Vec<usize> = (0..8).map(|_| r.gen_range(0..len)).collect();
        worst = worst.max(worst_fd_error(functional, &x, &grad, &coords, 1e-5, 1e-3));
    }
    let msg = format!("100 clips, max rel err {worst:.2e} (tol {MFCC_GRAD_TOL:.0e})");
    if worst < MFCC_GRAD_TOL { Ok(msg) } else { Err(msg) }
}

pub fn ctc_gradient() -> Outcome {
    let vocab = abc_vocab();
    let target = TranscriptionTarget::new("ab", &vocab).unwrap();
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let data = noise(5 * 4, 3.0, &mut r);
        let logits = Logits::new(5, 4, data.clone());
        let (_, grad) = ctc_loss_grad(&logits, &target).unwrap();
        let f = |d: &[f64]| ctc_loss(&Logits::new(5, 4, d.to_vec()), &target).unwrap();
        let coords: Vec<usize> = (0..20).collect();
        worst = worst.max(worst_fd_error(f, &data, &grad, &coords, 1e-6, 1e-3));
    }
    let msg = format!("20 random 5x4 logit matrices, max rel err {worst:.2e} (tol {CTC_GRAD_TOL:.0e})");
    if worst < CTC_GRAD_TOL { Ok(msg) } else { Err(msg) }
}

pub fn random_model(seed: u64) -> VictimModel {
    VictimModel::init(Architecture::default(), seed).unwrap()
}

/// Waveform gradient of the summed logits on a 0.2 s clip.
pub fn network_gradient() -> Outcome {
    let model = random_model(5);
    let mut r = rng(505);
    let x = noise(3200, 0.3, &mut r);
    let trace = model.forward_trace(&x).unwrap();
    let ones = vec![1.0; trace.logits.data.len()];
    let grad = model.backward_input(&trace, &ones);
    let f = |s: &[f64]| model.forward_trace(s).unwrap().logits.data.iter().sum::<f64>();
    let coords: Vec<usize> = (0..20).map(|_| r.gen_range(0..x.len())).collect();
    let worst = worst_fd_error(f, &x, &grad, &coords, 1e-6, 1e-3);
    let msg = format!("summed logits, 20 coordinates, max rel err {worst:.2e} (tol {NET_GRAD_TOL:.0e})");
    if worst < NET_GRAD_TOL { Ok(msg) } else { Err(msg) }
}

/// CTC loss gradient through the whole recognizer on 10 random coordinates.
pub fn input_gradient_check() -> Outcome {
    let model = random_model(6);
    let mut r = rng(606);
    let clip = AudioClip::new(noise(4800, 0.3, &mut r), 16_000);
    let target = model.target("go").unwrap();
    let grad = advaudio::asr::input_gradient(&model, &clip, &target).unwrap();
    let f = |s: &[f64]| model.loss_and_input_grad(s, &target).unwrap().0;
    let coords: Vec<usize> = (0..10).map(|_| r.gen_range(0..clip.len())).collect();
    let worst = worst_fd_error(f, &clip.samples, &grad, &coords, 1e-6, 1e-3);
    let msg = format!("CTC input gradient, 10 coordinates, max rel err {worst:.2e} (tol {NET_GRAD_TOL:.0e})");
    if worst < NET_GRAD_TOL { Ok(msg) } else { Err(msg) }
}

pub fn perceptual_gradient() -> Outcome {
    let mut r = rng(707);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x = tonal_clip(8192, &mut r);
        let grid = MaskingThresholdGrid::compute(&x, &PsychoConfig::default()).unwrap();
        let delta = noise(x.len(), 0.02, &mut r);
        let (_, grad) = perceptual_loss_grad(&delta, &grid).unwrap();
        let f = |d: &[f64]| perceptual_loss(d, &grid).unwrap();
        let coords: Vec<usize> = (0..20).map(|_| r.gen_range(0..x.len())).collect();
        worst = worst.max(worst_fd_error(f, &delta, &grad, &coords, 1e-7, 1e-3));
    }
    let msg = format!("5 clips x 20 coordinates, max rel err {worst:.2e} (tol {PERCEPTUAL_GRAD_TOL:.0e})");
    if worst < PERCEPTUAL_GRAD_TOL { Ok(msg) } else { Err(msg) }
}

/// Compound robust loss (noise, reverberation, offset, L2 term) on a 0.2 s clip.
pub fn robust_pipeline_gradient() -> Outcome {
    let model = random_model(8);
    let mut r = rng(808);
    let x = AudioClip::new(noise(3200, 0.3, &mut r), 16_000);
    let target = model.target("go").unwrap();
    let cfg = AttackConfig { variant: Variant::Robust, eot_copies: 3, ..AttackConfig::default() };
    let pool = RirPool::dynamic(RoomRanges::default(), RirSettings::default()).unwrap();
    let transforms = draw_transforms(x.len(), &pool, &cfg, &mut r).unwrap();
    let ctx = AttackContext { model: &model, x: &x, target: &target, variant: Variant::Robust, grid: None };
    let delta = noise(x.len(), 0.01, &mut r);
    let eval = compound_loss(&ctx, &delta, &transforms, 0.3, 2.0).unwrap();
    let f = |d: &[f64]| compound_loss(&ctx, d, &transforms, 0.3, 2.0).unwrap().total;
    let coords: Vec<usize> = (0..10).map(|_| r.gen_range(0..x.len())).collect();
    let worst = worst_fd_error(f, &delta, &eval.grad, &coords, 1e-6, 1e-3);
    let msg = format!("3 simulated rooms, 10 coordinates, max rel err {worst:.2e} (tol {PIPELINE_GRAD_TOL:.0e})");
    if worst < PIPELINE_GRAD_TOL { Ok(msg) } else { Err(msg) }
}

pub const QUIET_TOL_DB: f64 = 0.05;
pub const TONE_TOL_DB: f64 = 1.0;
pub const RT60_REL_TOL: f64 = 0.20;

fn closed_form_quiet(f: f64) -> f64 {
    let k = f / 1000.0;
    3.64 * k.powf(-0.8) - 6.5 * (-0.6 * (k - 3.3).powi(2)).exp() + 1e-3 * k.powi(4)
}

pub fn quiet_threshold_spots() -> Outcome {
    let mut parts = Vec::new();
    for (f, approx) in [(1000.0, 3.37), (3300.0, -4.98)] {
        let got = advaudio::psycho::quiet_threshold_hz(f);
        let exact = closed_form_quiet(f);
        parts.push(format!("{f} Hz: {got:.3} dB"));
        if (got - exact).abs() > QUIET_TOL_DB || (got - approx).abs() > QUIET_TOL_DB {
            return Err(format!("{f} Hz: {got} dB vs closed form {exact} / {approx}"));
        }
    }
    Ok(parts.join(", "))
}

/// Tonal maskers of one 512-sample frame of a 1 kHz tone: (bin, SPL) each.
pub fn single_tone_maskers() -> Vec<(usize, f64)> {
    let samples: Vec<f64> = (0..512).map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin()).collect();
    let grid = MaskingThresholdGrid::compute(&AudioClip::new(samples, 16_000), &PsychoConfig::default()).unwrap();
    grid.maskers[0]
        .iter()
        .filter(|m| m.kind == advaudio::psycho::MaskerKind::Tonal)
        .map(|m| (m.bin, m.spl))
        .collect()
}

pub fn single_tone_masker() -> Outcome {
    let tonal = single_tone_maskers();
    if tonal.len() != 1 {
        return Err(format!("{} tonal maskers", tonal.len()));
    }
    let msg = format!("one tonal masker at bin {} with {:.2} dB (want 96 +/- {TONE_TOL_DB})", tonal[0].0, tonal[0].1);
    if (tonal[0].1 - 96.0).abs() <= TONE_TOL_DB { Ok(msg) } else { Err(msg) }
}

/// p(0) = 0, p >= 0 and p(c delta) >= p(delta) for c >= 1 on 100 random clips.
pub fn perceptual_monotone() -> Outcome {
    let mut r = rng(909);
    for case in 0..100 {
        let len = r.gen_range(1024..6000);
        let x = if case % 2 == 0 { tonal_clip(len, &mut r) } else { AudioClip::new(noise(len, 0.5, &mut r), 16_000) };
        let grid = MaskingThresholdGrid::compute(&x, &PsychoConfig::default()).map_err(|e| e.to_string())?;
        let zero = perceptual_loss(&vec![0.0; len], &grid).map_err(|e| e.to_string())?;
        if zero != 0.0 {
            return Err(format!("clip {case}: p(0) = {zero}"));
        }
        let amp = 10f64.powf(r.gen_range(-4.0..-1.0));
        let delta = noise(len, amp, &mut r);
        let mut last = 0.0;
        for c in [1.0, 1.5, 2.0, 4.0, 10.0] {
            let scaled: Vec<f64> = delta.iter().map(|d| d * c).collect();
            let p = perceptual_loss(&scaled, &grid).map_err(|e| e.to_string())?;
            if p < 0.0 || p < last {
                return Err(format!("clip {case}: p = {p} after {last} at scale {c}"));
            }
            last = p;
        }
    }
    Ok("100 clips: p(0) = 0, p >= 0, nondecreasing under scaling".into())
}

pub fn rir_rooms() -> Outcome {
    let mut r = rng(1111);
    let ranges = RoomRanges::default();
    let settings = RirSettings::default();
    let mut worst = 0.0f64;
    for case in 0..100 {
        let room = advaudio::rir::sample_room(&ranges, &mut r).map_err(|e| e.to_string())?;
        let rir = advaudio::rir::generate_rir_with(&room, &settings).map_err(|e| e.to_string())?;
        let expect = (room.distance() / advaudio::rir::SPEED_OF_SOUND * settings.sample_rate as f64).round() as i64;
        let first = rir.first_nonzero().ok_or("all-zero response")? as i64;
        if (first - expect).abs() > 1 {
            return Err(format!("room {case}: first tap {first}, direct path at {expect}"));
        }
        let rt = advaudio::rir::measure_rt60(&rir).map_err(|e| e.to_string())?;
        let err = (rt - room.rt60).abs() / room.rt60;
        worst = worst.max(err);
        if err > RT60_REL_TOL {
            return Err(format!("room {case}: measured {rt:.3} s for requested {:.3} s", room.rt60));
        }
    }
    Ok(format!("100 rooms causal with direct path within 1 tap, worst RT60 error {:.1}%", 100.0 * worst))
}

pub fn alpha_schedule() -> Outcome {
    use advaudio::attack::{update_alpha, AlphaState};
    let cfg = AttackConfig::default();
    let mut s = AlphaState::new(cfg.alpha_init);
    for _ in 0..15 {
        s = update_alpha(s, true, &cfg);
    }
    if (s.alpha - 0.33).abs() > 1e-12 {
        return Err(format!("alpha {} after 15 successes", s.alpha));
    }
    let mut f = AlphaState::new(cfg.alpha_init);
    for _ in 0..100 {
        f = update_alpha(f, false, &cfg);
    }
    if f.alpha != cfg.alpha_init {
        return Err(format!("alpha {} after 100 failures", f.alpha));
    }
    Ok("0.3 -> 0.33 after 15 successes, 0.3 after 100 failures".into())
}

/// Full-length run on a small random recognizer; the trace records the
/// largest sample of the perturbation evaluated at every iteration.
pub fn projection_run(iterations: usize) -> Outcome {
    let arch = Architecture { hidden: 16, ..Architecture::default() };
    let model = VictimModel::init(arch, 3).unwrap();
    let mut r = rng(1212);
    let x = tonal_clip(8000, &mut r);
    let target = model.target("go").unwrap();
    let cfg = AttackConfig { min_iterations: iterations, ..AttackConfig::default() };
    let res = advaudio::attack::run_attack(&x, &target, &model, &cfg).map_err(|e| e.to_string())?;
    let worst = res.trace.iter().map(|t| t.delta_max).fold(0.0, f64::max);
    let best = res.best_delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let msg = format!(
        "{} iterations, max |delta| {worst:.6} (best {best:.6}) vs epsilon {:.6}",
        res.iterations_run, res.epsilon
    );
    if res.iterations_run == iterations && worst <= res.epsilon && best <= res.epsilon {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// The default victim trained on the default synthetic corpus, once per test binary.
pub fn trained_victim() -> &'static (VictimModel, advaudio::asr::TrainReport) {
    static CELL: std::sync::OnceLock<(VictimModel, advaudio::asr::TrainReport)> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let corpus = advaudio::asr::synth::synthetic_corpus(&Default::default()).unwrap();
        advaudio::asr::train_with_report(&corpus, &Default::default()).unwrap()
    })
}
