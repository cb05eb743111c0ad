mod alpha;
mod config;
mod eot;

use std::io::Write;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use alpha::{update_alpha, AlphaState};
pub use config::{AttackConfig, PoolSpec, Variant};
pub use eot::{apply_offset, draw_transforms, eot_transform, DrawRecord, Transform};

use crate::asr::{Logits, TranscriptionTarget, VictimModel};
use crate::dsp::{snr_db, AudioClip};
use crate::error::{Error, Result};
use crate::psycho::{perceptual_loss, perceptual_loss_grad, MaskingThresholdGrid};
use crate::rir::RirPool;

/// Symmetric clamp to `[-epsilon, epsilon]`.
pub fn clip_perturbation(delta: &[f64], epsilon: f64) -> Vec<f64> {
    delta.iter().map(|d| d.clamp(-epsilon, epsilon)).collect()
}

/// Length normalization of the regularizer.
pub fn beta(len_x: usize, len_ref: usize) -> f64 {
    (len_ref as f64 / len_x as f64).sqrt()
}

/// Everything fixed for the duration of one attack.
pub struct AttackContext<'a> {
    pub model: &'a VictimModel,
    pub x: &'a AudioClip,
    pub target: &'a TranscriptionTarget,
    pub variant: Variant,
    /// Needed by the perceptual variants.
    pub grid: Option<&'a MaskingThresholdGrid>,
}

#[derive(Debug, Clone)]
pub struct LossEval {
    pub total: f64,
    pub model_loss: f64,
    /// Unweighted regularizer value (L2 norm or perceptual loss).
    pub regularizer: f64,
    pub grad: Vec<f64>,
    /// Logits of the clean adversarial clip, or of every copy for the robust variants.
    pub logits: Vec<Logits>,
}

/// Loss for the current clipped perturbation and its exact gradient.
pub fn compound_loss(
    ctx: &AttackContext<'_>,
    delta: &[f64],
    transforms: &[Transform],
    alpha: f64,
    beta: f64,
) -> Result<LossEval> {
    if delta.len() != ctx.x.len() {
        return Err(Error::LengthMismatch { what: "perturbation", left: delta.len(), right: ctx.x.len() });
    }
    let adv: Vec<f64> = ctx.x.samples.iter().zip(delta).map(|(a, b)| a + b).collect();
    let (model_loss, mut grad, logits) = if ctx.variant.uses_eot() {
        if transforms.is_empty() {
            return Err(Error::EmptyPool);
        }
        let parts = transforms
            .par_iter()
            .map(|t| {
                let (loss, g, logits) = ctx.model.loss_and_input_grad(&t.apply(&adv), ctx.target)?;
                Ok((loss, t.adjoint(&g), logits))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = parts.len() as f64;
        let mut grad = vec![0.0; adv.len()];
        let mut loss = 0.0;
        let mut all = Vec::with_capacity(parts.len());
        for (l, g, lg) in parts {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            all.push(lg);
        }
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad, all)
    } else {
        let (loss, g, lg) = ctx.model.loss_and_input_grad(&adv, ctx.target)?;
        (loss, g, vec![lg])
    };
    let (regularizer, reg_grad) = if ctx.variant.uses_psycho() {
        let grid = ctx.grid.ok_or_else(|| Error::Config("perceptual variant needs a masking threshold".into()))?;
        perceptual_loss_grad(delta, grid)?
    } else {
        let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        let g = if norm > 0.0 { delta.iter().map(|d| d / norm).collect() } else { vec![0.0; delta.len()] };
        (norm, g)
    };
    let w = alpha * beta;
    grad.iter_mut().zip(&reg_grad).for_each(|(a, b)| *a += w * b);
    Ok(LossEval { total: model_loss + w * regularizer, model_loss, regularizer, grad, logits })
}

/// Decodes every logit matrix and counts exact target matches.
pub fn success_check(
    model: &VictimModel,
    variant: Variant,
    logits: &[Logits],
    target: &TranscriptionTarget,
    quorum: usize,
) -> (bool, usize, Vec<Vec<String>>) {
    let want = target.words();
    let transcripts: Vec<Vec<String>> = logits.iter().map(|l| model.decode(l)).collect();
    let count = transcripts.iter().filter(|t| **t == want).count();
    let needed = if variant.uses_eot() { quorum } else { 1 };
    (count >= needed, count, transcripts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub model_loss: f64,
    pub regularizer: f64,
    pub alpha: f64,
    pub streak: i64,
    pub success: bool,
    pub per_rir_success_count: usize,
    /// Largest |sample| of the clipped perturbation evaluated this iteration.
    pub delta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub variant: Variant,
    pub target: String,
    pub epsilon: f64,
    pub best_delta: Vec<f64>,
    pub best_iteration: usize,
    pub first_success_iteration: Option<usize>,
    pub iterations_run: usize,
    pub success_found: bool,
    pub per_rir_success_count: usize,
    pub final_alpha: f64,
    /// None when the best perturbation is all zeros.
    pub snr_db: Option<f64>,
    pub perceptual_loss: f64,
    pub transcript_clean: Vec<String>,
    pub transcripts_transformed: Vec<Vec<String>>,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
}

impl AttackResult {
    pub fn adversarial(&self, x: &AudioClip) -> AudioClip {
        let s = x.samples.iter().zip(&self.best_delta).map(|(a, b)| a + b).collect();
        AudioClip::new(s, x.sample_rate)
    }

    pub fn delta_clip(&self, sample_rate: u32) -> AudioClip {
        AudioClip::new(self.best_delta.clone(), sample_rate)
    }

    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,loss,model_loss,regularizer,alpha,streak,success,per_rir_success_count,delta_max")?;
        for r in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.loss,
                r.model_loss,
                r.regularizer,
                r.alpha,
                r.streak,
                u8::from(r.success),
                r.per_rir_success_count,
                r.delta_max
            )?;
        }
        Ok(())
    }
}

/// Per-iteration random stream, independent of how many draws earlier iterations made.
pub fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

/// Builds the configured RIR pool and runs the attack.
pub fn run_attack(x: &AudioClip, target: &TranscriptionTarget, model: &VictimModel, cfg: &AttackConfig) -> Result<AttackResult> {
    let pool = cfg.pool.build(&cfg.room_ranges, cfg.rir_settings.clone())?;
    run_attack_with_pool(x, target, model, cfg, &pool)
}

pub fn run_attack_with_pool(
    x: &AudioClip,
    target: &TranscriptionTarget,
    model: &VictimModel,
    cfg: &AttackConfig,
    pool: &RirPool,
) -> Result<AttackResult> {
    cfg.validate()?;
    if x.sample_rate != model.feature_config().sample_rate {
        return Err(Error::SampleRateMismatch(x.sample_rate, model.feature_config().sample_rate));
    }
    let grid = MaskingThresholdGrid::compute(x, &cfg.psycho)?;
    let ctx = AttackContext { model, x, target, variant: cfg.variant, grid: Some(&grid) };
    let epsilon = cfg.epsilon_for(&x.samples);
    let lr = cfg.learning_rate();
    let b = beta(x.len(), cfg.ref_length);
    let quorum = cfg.quorum();

    let mut delta = vec![0.0; x.len()];
    let mut state = AlphaState::new(cfg.alpha_init);
    let mut trace = Vec::new();
    let mut first_success = None;
    // (count, perceptibility, iteration, delta, transcripts)
    let mut best: Option<(usize, f64, usize, Vec<f64>, Vec<Vec<String>>)> = None;
    let mut i = 0;
    loop {
        let transforms = if cfg.variant.uses_eot() {
            draw_transforms(x.len(), pool, cfg, &mut iteration_rng(cfg.seed, i))?
        } else {
            Vec::new()
        };
        let eval = compound_loss(&ctx, &delta, &transforms, state.alpha, b)?;
        let (success, count, transcripts) = success_check(model, cfg.variant, &eval.logits, target, quorum);
        if success && first_success.is_none() {
            first_success = Some(i);
        }
        let perceptibility = if cfg.variant.uses_psycho() {
            eval.regularizer
        } else {
            delta.iter().map(|d| d * d).sum::<f64>().sqrt()
        };
        let better = match &best {
            None => true,
            Some((c, p, ..)) => count > *c || (count == *c && (count == 0 || perceptibility < *p)),
        };
        if better {
            best = Some((count, perceptibility, i, delta.clone(), transcripts));
        }
        trace.push(IterationRecord {
            iteration: i,
            loss: eval.total,
            model_loss: eval.model_loss,
            regularizer: eval.regularizer,
            alpha: state.alpha,
            streak: state.streak,
            success,
            per_rir_success_count: count,
            delta_max: delta.iter().fold(0.0, |m, d| m.max(d.abs())),
        });
        for (d, g) in delta.iter_mut().zip(&eval.grad) {
            *d = (*d - lr * g).clamp(-epsilon, epsilon);
        }
        state = update_alpha(state, success, cfg);
        i += 1;
        if i >= cfg.max_iterations() || (i >= cfg.min_iterations && first_success.is_some()) {
            break;
        }
    }

    let (count, _, best_iteration, best_delta, transcripts) = best.expect("at least one iteration");
    let adv = AudioClip::new(x.samples.iter().zip(&best_delta).map(|(a, b)| a + b).collect(), x.sample_rate);
    let transcript_clean = model.transcribe(&adv)?;
    let delta_clip = AudioClip::new(best_delta.clone(), x.sample_rate);
    let snr = match snr_db(x, &delta_clip) {
        Ok(v) => Some(v),
        Err(Error::InfiniteSnr) => None,
        Err(e) => return Err(e),
    };
    Ok(AttackResult {
        variant: cfg.variant,
        target: target.text.clone(),
        epsilon,
        perceptual_loss: perceptual_loss(&best_delta, &grid)?,
        best_delta,
        best_iteration,
        first_success_iteration: first_success,
        iterations_run: i,
        success_found: first_success.is_some(),
        per_rir_success_count: count,
        final_alpha: state.alpha,
        snr_db: snr,
        transcript_clean,
        transcripts_transformed: if cfg.variant.uses_eot() { transcripts } else { Vec::new() },
        trace,
    })
}
