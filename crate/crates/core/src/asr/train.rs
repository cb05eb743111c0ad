use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ctc::ctc_loss_grad;
use super::model::{Architecture, Parameters, VictimModel};
use super::vocab::{words, TranscriptionTarget};
use super::Utterance;
use crate::error::{Error, Result};
use crate::eval::corpus_wer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Learning rate is multiplied by this after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    /// Global gradient-norm ceiling.
    pub grad_clip: f64,
    pub holdout_fraction: f64,
    /// Held-out WER (percent) above which training counts as failed.
    pub max_wer: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Architecture::default(),
            epochs: 20,
            learning_rate: 0.005,
            momentum: 0.9,
            lr_decay: 0.92,
            batch_size: 8,
            grad_clip: 50.0,
            holdout_fraction: 0.1,
            max_wer: 10.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let ok = self.epochs > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.lr_decay > 0.0
            && self.batch_size > 0
            && self.grad_clip > 0.0
            && (0.0..1.0).contains(&self.holdout_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid training configuration".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_clips: usize,
    pub heldout_clips: usize,
    pub train_wer: f64,
    /// Equals `train_wer` when no clips are held out.
    pub heldout_wer: f64,
    pub history: Vec<EpochStats>,
}

/// Deterministic split: shuffled by seed, the tail is held out.
pub fn split<'a>(data: &'a [Utterance], cfg: &TrainConfig) -> (Vec<&'a Utterance>, Vec<&'a Utterance>) {
    let mut refs: Vec<&Utterance> = data.iter().collect();
    refs.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed));
    let n_hold = (data.len() as f64 * cfg.holdout_fraction).round() as usize;
    let hold = refs.split_off(data.len() - n_hold.min(data.len().saturating_sub(1)));
    (refs, hold)
}

/// Greedy-decode WER of `model` over `data`.
pub fn evaluate(model: &VictimModel, data: &[&Utterance]) -> Result<f64> {
    let pairs = data
        .iter()
        .map(|u| Ok((words(&u.text), model.transcribe(&u.clip)?)))
        .collect::<Result<Vec<_>>>()?;
    corpus_wer(&pairs)
}

fn feature_scale(model: &VictimModel, data: &[&Utterance]) -> Result<Vec<f64>> {
    let n_c = model.feature_config().n_coeffs;
    let mut sum_sq = vec![0.0; n_c];
    let mut count = 0usize;
    for u in data {
        let (feats, _, n_t) = model.normalized_features(&u.clip.samples)?;
        for t in 0..n_t {
            for c in 0..n_c {
                sum_sq[c] += feats[t * n_c + c].powi(2);
            }
        }
        count += n_t;
    }
    Ok(sum_sq.iter().map(|s| 1.0 / (s / count as f64).sqrt().max(1e-6)).collect())
}

pub fn train(data: &[Utterance], cfg: &TrainConfig) -> Result<VictimModel> {
    train_with_report(data, cfg).map(|(m, _)| m)
}

/// Trains from scratch. Fails with `NotConverged` if the held-out WER stays above `max_wer`.
pub fn train_with_report(data: &[Utterance], cfg: &TrainConfig) -> Result<(VictimModel, TrainReport)> {
    let (model, report) = fit(data, cfg)?;
    if report.heldout_wer > cfg.max_wer {
        return Err(Error::NotConverged { wer: report.heldout_wer, epochs: cfg.epochs });
    }
    Ok((model, report))
}

/// Trains without applying the WER gate.
pub fn fit(data: &[Utterance], cfg: &TrainConfig) -> Result<(VictimModel, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("no training utterances".into()));
    }
    let (train_set, hold) = split(data, cfg);
    let mut model = VictimModel::init(cfg.arch.clone(), cfg.seed)?;
    model.params_mut().feature_scale = feature_scale(&model, &train_set)?;
    let targets = train_set
        .iter()
        .map(|u| TranscriptionTarget::new(&u.text, model.vocab()))
        .collect::<Result<Vec<_>>>()?;

    let mut velocity = Parameters::zeros_like(model.params());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lr = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Parameters::zeros_like(model.params());
            for &i in batch {
                let trace = model.forward_trace(&train_set[i].clip.samples)?;
                let (loss, dlogits) = ctc_loss_grad(&trace.logits, &targets[i])?;
                total += loss;
                model.backward_params(&trace, &dlogits, &mut grads);
            }
            let inv = 1.0 / batch.len() as f64;
            let norm = grads.trainable().iter().flat_map(|t| t.iter()).map(|g| (g * inv).powi(2)).sum::<f64>().sqrt();
            let scale = inv * if norm > cfg.grad_clip { cfg.grad_clip / norm } else { 1.0 };
            let g_all = grads.trainable();
            for ((p, v), g) in model.params_mut().trainable_mut().into_iter().zip(velocity.trainable_mut()).zip(g_all) {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = cfg.momentum * *v - lr * g * scale;
                    *p += *v;
                }
            }
        }
        history.push(EpochStats { epoch, learning_rate: lr, mean_loss: total / train_set.len() as f64 });
        lr *= cfg.lr_decay;
    }
    let train_wer = evaluate(&model, &train_set)?;
    let heldout_wer = if hold.is_empty() { train_wer } else { evaluate(&model, &hold)? };
    let report = TrainReport {
        train_clips: train_set.len(),
        heldout_clips: hold.len(),
        train_wer,
        heldout_wer,
        history,
    };
    Ok((model, report))
}
