mod wer;

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use wer::{corpus_wer, wer, word_errors};

use crate::asr::{TranscriptionTarget, Utterance, VictimModel};
use crate::attack::{run_attack_with_pool, AttackConfig, AttackResult, PoolSpec, Transform, Variant};
use crate::dsp::AudioClip;
use crate::error::{Error, Result};
use crate::rir::{RirPool, RirSettings, RoomMode, RoomRanges};

/// Target phrases of increasing length. The first is the classic command.
pub const TARGETS: [&str; 4] = [
    "please open the door",
    "it is manifest that man",
    "but the bear maintained the seat",
    "their assumed character changed with the door",
];

/// Training RT60 intervals compared by the reverberation sweep.
pub const SWEEP_INTERVALS: [(f64, f64); 5] = [(0.2, 0.5), (0.4, 0.8), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5)];
/// RT60 of the evaluation rooms in the sweep.
pub const SWEEP_TRUE_RT60: f64 = 0.45;

/// Dynamic generation plus fixed pools of 32 and 128 RIRs in one or many rooms.
pub fn pool_specs(seed: u64) -> Vec<PoolSpec> {
    let mut v = vec![PoolSpec::Dynamic];
    for size in [32, 128] {
        for room_mode in [RoomMode::OneRoom, RoomMode::VariousRooms] {
            v.push(PoolSpec::Fixed { size, room_mode, seed });
        }
    }
    v
}

/// Keeps evaluation draws away from every attack-time stream.
const EVAL_DOMAIN: u64 = 0x6576_616c_5f72_6e67;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_transforms: usize,
    pub ranges: RoomRanges,
    pub rir_settings: RirSettings,
    pub noise_sigma: f64,
    pub max_offset: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_transforms: 10,
            ranges: RoomRanges::default(),
            rir_settings: RirSettings::default(),
            noise_sigma: 0.001,
            max_offset: 160,
            seed: 1_000,
        }
    }
}

impl EvalConfig {
    /// Random stream for one transformation of one example.
    pub fn rng(&self, example: usize, transform: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ EVAL_DOMAIN);
        rng.set_stream(((example as u64) << 20) | transform as u64);
        rng
    }

    fn transform_cfg(&self) -> AttackConfig {
        AttackConfig {
            eot_copies: 1,
            noise_sigma: self.noise_sigma,
            max_offset: self.max_offset,
            ..AttackConfig::default()
        }
    }
}

/// The `n` transformations `simulate_environment` would apply to a clip of `len` samples.
pub fn draw_environment(len: usize, n: usize, pool: &RirPool, cfg: &EvalConfig, rng: &mut impl Rng) -> Result<Vec<Transform>> {
    let tcfg = cfg.transform_cfg();
    (0..n).map(|_| Transform::draw(len, pool, &tcfg, rng)).collect()
}

/// `n` independent room simulations of `adv`.
pub fn simulate_environment(adv: &AudioClip, n: usize, pool: &RirPool, cfg: &EvalConfig, rng: &mut impl Rng) -> Result<Vec<AudioClip>> {
    Ok(draw_environment(adv.len(), n, pool, cfg, rng)?
        .iter()
        .map(|t| AudioClip::new(t.apply(&adv.samples), adv.sample_rate))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub example_id: String,
    pub variant: Variant,
    pub target: String,
    /// Mean over the transformed copies; unclipped.
    pub wer_to_target: f64,
    pub snr_db: Option<f64>,
    pub perceptual_loss: f64,
    pub success_found: bool,
    /// Copies that decoded to the target exactly.
    pub exact_matches: usize,
    pub transcripts: Vec<String>,
}

/// Evaluates one adversarial example under `cfg.n_transforms` simulated rooms.
pub fn evaluate_example(
    example_index: usize,
    example_id: &str,
    x: &AudioClip,
    result: &AttackResult,
    model: &VictimModel,
    pool: &RirPool,
    cfg: &EvalConfig,
) -> Result<EvalRecord> {
    let adv = result.adversarial(x);
    let want: Vec<String> = result.target.split_whitespace().map(str::to_owned).collect();
    let mut total = 0.0;
    let mut exact = 0;
    let mut transcripts = Vec::with_capacity(cfg.n_transforms);
    for t in 0..cfg.n_transforms {
        let copy = simulate_environment(&adv, 1, pool, cfg, &mut cfg.rng(example_index, t))?.remove(0);
        let hyp = model.transcribe(&copy)?;
        total += wer(&want, &hyp)?;
        exact += usize::from(hyp == want);
        transcripts.push(hyp.join(" "));
    }
    Ok(EvalRecord {
        example_id: example_id.to_owned(),
        variant: result.variant,
        target: result.target.clone(),
        wer_to_target: total / cfg.n_transforms as f64,
        snr_db: result.snr_db,
        perceptual_loss: result.perceptual_loss,
        success_found: result.success_found,
        exact_matches: exact,
        transcripts,
    })
}

/// Attacks every utterance; example `i` uses seed `cfg.seed ^ i`.
pub fn attack_corpus(
    corpus: &[Utterance],
    target: &TranscriptionTarget,
    model: &VictimModel,
    cfg: &AttackConfig,
    pool: &RirPool,
) -> Result<Vec<AttackResult>> {
    corpus
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let cfg = AttackConfig { seed: cfg.seed ^ i as u64, ..cfg.clone() };
            run_attack_with_pool(&u.clip, target, model, &cfg, pool)
        })
        .collect()
}

pub fn evaluate_corpus(
    corpus: &[Utterance],
    results: &[AttackResult],
    model: &VictimModel,
    cfg: &EvalConfig,
) -> Result<Vec<EvalRecord>> {
    if corpus.len() != results.len() {
        return Err(Error::LengthMismatch { what: "attack results", left: results.len(), right: corpus.len() });
    }
    let pool = RirPool::dynamic(cfg.ranges.clone(), cfg.rir_settings.clone())?;
    corpus
        .par_iter()
        .zip(results)
        .enumerate()
        .map(|(i, (u, r))| evaluate_example(i, &u.id, &u.clip, r, model, &pool, cfg))
        .collect()
}

/// Aggregate for one (variant, target) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: Variant,
    pub target: String,
    pub examples: usize,
    pub mean_wer: f64,
    /// Over examples whose attack succeeded; None if none did.
    pub mean_snr_db: Option<f64>,
    pub mean_perceptual_loss: f64,
    pub success_rate: f64,
    /// Mean WER restricted to successfully generated examples.
    pub mean_wer_successful: Option<f64>,
    /// Fraction of transformed copies of successful examples that decode exactly.
    pub correct_rate_successful: Option<f64>,
}

/// Summed in sorted order so the result does not depend on record order.
fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(f64::total_cmp);
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(records: &[EvalRecord]) -> Result<Vec<Summary>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    let mut groups: BTreeMap<(String, String), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.variant.name().to_owned(), r.target.clone())).or_default().push(r);
    }
    Ok(groups
        .into_values()
        .map(|g| {
            let ok: Vec<&&EvalRecord> = g.iter().filter(|r| r.success_found).collect();
            let copies: usize = ok.iter().map(|r| r.transcripts.len()).sum();
            Summary {
                variant: g[0].variant,
                target: g[0].target.clone(),
                examples: g.len(),
                mean_wer: mean(g.iter().map(|r| r.wer_to_target)).expect("nonempty group"),
                mean_snr_db: mean(ok.iter().filter_map(|r| r.snr_db)),
                mean_perceptual_loss: mean(g.iter().map(|r| r.perceptual_loss)).expect("nonempty group"),
                success_rate: 100.0 * ok.len() as f64 / g.len() as f64,
                mean_wer_successful: mean(ok.iter().map(|r| r.wer_to_target)),
                correct_rate_successful: (copies > 0)
                    .then(|| 100.0 * ok.iter().map(|r| r.exact_matches).sum::<usize>() as f64 / copies as f64),
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

pub fn write_records_csv<W: Write>(records: &[EvalRecord], mut out: W) -> Result<()> {
    writeln!(out, "example_id,variant,target,wer_to_target,snr_db,perceptual_loss,success_found,exact_matches")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{:.4},{},{:.6},{},{}",
            r.example_id, r.variant, r.target, r.wer_to_target, opt(r.snr_db), r.perceptual_loss, u8::from(r.success_found), r.exact_matches
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[Summary], mut out: W) -> Result<()> {
    writeln!(out, "variant,target,examples,mean_wer,mean_snr_db,mean_perceptual_loss,success_rate,mean_wer_successful,correct_rate_successful")?;
    for s in rows {
        writeln!(
            out,
            "{},{},{},{:.4},{},{:.6},{:.2},{},{}",
            s.variant, s.target, s.examples, s.mean_wer, opt(s.mean_snr_db), s.mean_perceptual_loss, s.success_rate,
            opt(s.mean_wer_successful), opt(s.correct_rate_successful)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rt60_min: f64,
    pub rt60_max: f64,
    pub mean_wer: f64,
    pub success_rate: f64,
}

/// Robust attacks trained on each RT60 interval, all evaluated in rooms with `true_rt60`.
pub fn sweep_reverberation(
    corpus: &[Utterance],
    target: &TranscriptionTarget,
    model: &VictimModel,
    attack: &AttackConfig,
    intervals: &[(f64, f64)],
    true_rt60: f64,
    eval: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    let eval = EvalConfig { ranges: eval.ranges.clone().with_rt60(true_rt60, true_rt60), ..eval.clone() };
    eval.ranges.validate()?;
    intervals
        .iter()
        .map(|&(lo, hi)| {
            let ranges = attack.room_ranges.clone().with_rt60(lo, hi);
            ranges.validate()?;
            let cfg = AttackConfig { room_ranges: ranges, pool: PoolSpec::Dynamic, ..attack.clone() };
            let pool = cfg.pool.build(&cfg.room_ranges, cfg.rir_settings.clone())?;
            let results = attack_corpus(corpus, target, model, &cfg, &pool)?;
            let records = evaluate_corpus(corpus, &results, model, &eval)?;
            let s = summarize(&records)?.remove(0);
            Ok(SweepRow { rt60_min: lo, rt60_max: hi, mean_wer: s.mean_wer, success_rate: s.success_rate })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRow {
    pub pool: String,
    pub mean_wer: f64,
    pub success_rate: f64,
    /// Restricted to successfully generated attacks.
    pub mean_wer_successful: Option<f64>,
    pub correct_rate_successful: Option<f64>,
}

/// Robust attacks per RIR-pool specification, evaluated in freshly drawn rooms.
pub fn compare_pools(
    corpus: &[Utterance],
    target: &TranscriptionTarget,
    model: &VictimModel,
    attack: &AttackConfig,
    pools: &[PoolSpec],
    eval: &EvalConfig,
) -> Result<Vec<PoolRow>> {
    pools
        .iter()
        .map(|spec| {
            let cfg = AttackConfig { pool: spec.clone(), ..attack.clone() };
            let pool = spec.build(&cfg.room_ranges, cfg.rir_settings.clone())?;
            let results = attack_corpus(corpus, target, model, &cfg, &pool)?;
            let records = evaluate_corpus(corpus, &results, model, eval)?;
            let s = summarize(&records)?.remove(0);
            Ok(PoolRow {
                pool: spec.label(),
                mean_wer: s.mean_wer,
                success_rate: s.success_rate,
                mean_wer_successful: s.mean_wer_successful,
                correct_rate_successful: s.correct_rate_successful,
            })
        })
        .collect()
}
