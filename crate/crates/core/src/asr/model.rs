use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ctc::{collapse, ctc_loss_grad, Logits};
use super::vocab::{words, TranscriptionTarget, Vocabulary};
use crate::dsp::{AudioClip, FeatureConfig, MfccCache, MfccExtractor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub features: FeatureConfig,
    pub hidden: usize,
    pub layers: usize,
    pub vocab: Vocabulary,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            hidden: 128,
            layers: 2,
            vocab: Vocabulary::default(),
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.hidden == 0 || self.layers == 0 {
            return Err(Error::Config("model needs at least one hidden unit and layer".into()));
        }
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        Self { rows, cols, data }
    }

    /// `out += self * x`
    fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    /// `out += self^T * v`
    fn mul_t_add(&self, v: &[f64], out: &mut [f64]) {
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            if vi != 0.0 {
                for (o, &r) in out.iter_mut().zip(row) {
                    *o += vi * r;
                }
            }
        }
    }

    /// `self += a * b^T`
    fn outer_add(&mut self, a: &[f64], b: &[f64]) {
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            for (r, &bj) in row.iter_mut().zip(b) {
                *r += ai * bj;
            }
        }
    }
}

/// Eight independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

/// Elman layer: `h_t = tanh(W x_t + U h_{t-1} + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnLayer {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// Per-coefficient gain applied after mean removal.
    pub feature_scale: Vec<f64>,
    pub layers: Vec<RnnLayer>,
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
}

impl Parameters {
    pub fn zeros_like(other: &Parameters) -> Self {
        Self {
            feature_scale: vec![0.0; other.feature_scale.len()],
            layers: other
                .layers
                .iter()
                .map(|l| RnnLayer {
                    w: Matrix::zeros(l.w.rows, l.w.cols),
                    u: Matrix::zeros(l.u.rows, l.u.cols),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
            out_w: Matrix::zeros(other.out_w.rows, other.out_w.cols),
            out_b: vec![0.0; other.out_b.len()],
        }
    }

    /// Trainable tensors in a fixed order (the feature scale is not trained).
    pub fn trainable(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            v.push(&l.w.data);
            v.push(&l.u.data);
            v.push(&l.b);
        }
        v.push(&self.out_w.data);
        v.push(&self.out_b);
        v
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v: Vec<&mut Vec<f64>> = Vec::new();
        for l in &mut self.layers {
            v.push(&mut l.w.data);
            v.push(&mut l.u.data);
            v.push(&mut l.b);
        }
        v.push(&mut self.out_w.data);
        v.push(&mut self.out_b);
        v
    }

    /// Named tensors with shapes, in checkpoint order.
    pub fn named(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut v = vec![("feature_scale".to_string(), vec![self.feature_scale.len()], &self.feature_scale[..])];
        for (i, l) in self.layers.iter().enumerate() {
            v.push((format!("rnn.{i}.w"), vec![l.w.rows, l.w.cols], &l.w.data[..]));
            v.push((format!("rnn.{i}.u"), vec![l.u.rows, l.u.cols], &l.u.data[..]));
            v.push((format!("rnn.{i}.b"), vec![l.b.len()], &l.b[..]));
        }
        v.push(("out.w".to_string(), vec![self.out_w.rows, self.out_w.cols], &self.out_w.data[..]));
        v.push(("out.b".to_string(), vec![self.out_b.len()], &self.out_b[..]));
        v
    }

    pub fn count(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    mfcc: MfccCache,
    /// Normalized features, `n_frames x n_coeffs`.
    inputs: Vec<f64>,
    /// Hidden activations per layer, `n_frames x hidden`.
    hidden: Vec<Vec<f64>>,
    pub logits: Logits,
}

#[derive(Debug, Clone)]
pub struct VictimModel {
    arch: Architecture,
    params: Parameters,
    extractor: MfccExtractor,
}

impl VictimModel {
    /// Random initialization with unit feature scale.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_in = arch.features.n_coeffs;
        let h = arch.hidden;
        let mut layers = Vec::with_capacity(arch.layers);
        for i in 0..arch.layers {
            let fan_in = if i == 0 { n_in } else { h };
            layers.push(RnnLayer {
                w: Matrix::uniform(h, fan_in, (1.0 / fan_in as f64).sqrt(), &mut rng),
                u: Matrix::uniform(h, h, 0.5 / (h as f64).sqrt(), &mut rng),
                b: vec![0.0; h],
            });
        }
        let v = arch.vocab.size();
        let params = Parameters {
            feature_scale: vec![1.0; n_in],
            layers,
            out_w: Matrix::uniform(v, h, (1.0 / h as f64).sqrt(), &mut rng),
            out_b: vec![0.0; v],
        };
        Self::from_parts(arch, params)
    }

    pub fn from_parts(arch: Architecture, params: Parameters) -> Result<Self> {
        arch.validate()?;
        let n_in = arch.features.n_coeffs;
        let h = arch.hidden;
        let shapes_ok = params.feature_scale.len() == n_in
            && params.layers.len() == arch.layers
            && params.layers.iter().enumerate().all(|(i, l)| {
                let fan_in = if i == 0 { n_in } else { h };
                (l.w.rows, l.w.cols, l.u.rows, l.u.cols, l.b.len()) == (h, fan_in, h, h, h)
                    && l.w.data.len() == h * fan_in
                    && l.u.data.len() == h * h
            })
            && (params.out_w.rows, params.out_w.cols) == (arch.vocab.size(), h)
            && params.out_w.data.len() == arch.vocab.size() * h
            && params.out_b.len() == arch.vocab.size();
        if !shapes_ok {
            return Err(Error::Checkpoint("parameter shapes do not match the architecture".into()));
        }
        let extractor = MfccExtractor::new(arch.features.clone())?;
        Ok(Self { arch, params, extractor })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.arch.vocab
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.arch.features
    }

    pub fn target(&self, text: &str) -> Result<TranscriptionTarget> {
        TranscriptionTarget::new(text, &self.arch.vocab)
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate != self.arch.features.sample_rate {
            return Err(Error::SampleRateMismatch(clip.sample_rate, self.arch.features.sample_rate));
        }
        Ok(())
    }

    pub fn forward(&self, clip: &AudioClip) -> Result<Logits> {
        self.check_rate(clip)?;
        Ok(self.forward_trace(&clip.samples)?.logits)
    }

    /// Raw MFCCs with per-utterance mean removal and the stored per-coefficient gain.
    pub fn normalized_features(&self, samples: &[f64]) -> Result<(Vec<f64>, MfccCache, usize)> {
        let (feats, cache) = self.extractor.forward(samples)?;
        let (n_t, n_c) = (feats.n_frames, feats.n_coeffs);
        let mut mean = vec![0.0; n_c];
        for t in 0..n_t {
            for (m, v) in mean.iter_mut().zip(feats.row(t)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n_t as f64);
        let mut inputs = Vec::with_capacity(n_t * n_c);
        for t in 0..n_t {
            for c in 0..n_c {
                inputs.push((feats.data[t * n_c + c] - mean[c]) * self.params.feature_scale[c]);
            }
        }
        Ok((inputs, cache, n_t))
    }

    pub fn forward_trace(&self, samples: &[f64]) -> Result<Trace> {
        let (inputs, mfcc, n_t) = self.normalized_features(samples)?;
        let n_c = self.arch.features.n_coeffs;
        let h = self.arch.hidden;
        let mut hidden = Vec::with_capacity(self.params.layers.len());
        for (i, layer) in self.params.layers.iter().enumerate() {
            let (src, width) = if i == 0 { (&inputs, n_c) } else { (&hidden[i - 1], h) };
            let mut out = vec![0.0; n_t * h];
            for t in 0..n_t {
                let (before, rest) = out.split_at_mut(t * h);
                let cur = &mut rest[..h];
                cur.copy_from_slice(&layer.b);
                layer.w.mul_add(&src[t * width..(t + 1) * width], cur);
                if t > 0 {
                    layer.u.mul_add(&before[(t - 1) * h..], cur);
                }
                cur.iter_mut().for_each(|v| *v = v.tanh());
            }
            hidden.push(out);
        }
        let v = self.arch.vocab.size();
        let top = hidden.last().expect("at least one layer");
        let mut logits = Vec::with_capacity(n_t * v);
        for t in 0..n_t {
            let mut row = self.params.out_b.clone();
            self.params.out_w.mul_add(&top[t * h..(t + 1) * h], &mut row);
            logits.extend(row);
        }
        Ok(Trace { mfcc, inputs, hidden, logits: Logits::new(n_t, v, logits) })
    }

    /// Backpropagates `dlogits` through the network. Accumulates parameter
    /// gradients into `grads` when given; returns the gradient with respect
    /// to the normalized input features.
    fn backward_net(&self, trace: &Trace, dlogits: &[f64], mut grads: Option<&mut Parameters>) -> Vec<f64> {
        let n_t = trace.logits.n_frames;
        let v = trace.logits.n_classes;
        let h = self.arch.hidden;
        let n_c = self.arch.features.n_coeffs;
        let top = trace.hidden.last().expect("at least one layer");

        // Gradient flowing into the top hidden layer's outputs.
        let mut d_out = vec![0.0; n_t * h];
        for t in 0..n_t {
            let g = &dlogits[t * v..(t + 1) * v];
            self.params.out_w.mul_t_add(g, &mut d_out[t * h..(t + 1) * h]);
            if let Some(gr) = grads.as_deref_mut() {
                gr.out_w.outer_add(g, &top[t * h..(t + 1) * h]);
                gr.out_b.iter_mut().zip(g).for_each(|(b, x)| *b += x);
            }
        }
        for (i, layer) in self.params.layers.iter().enumerate().rev() {
            let hs = &trace.hidden[i];
            let (src, width) = if i == 0 { (&trace.inputs, n_c) } else { (&trace.hidden[i - 1], h) };
            let mut d_src = vec![0.0; n_t * width];
            let mut carry = vec![0.0; h];
            let mut da = vec![0.0; h];
            for t in (0..n_t).rev() {
                for j in 0..h {
                    let y = hs[t * h + j];
                    da[j] = (d_out[t * h + j] + carry[j]) * (1.0 - y * y);
                }
                layer.w.mul_t_add(&da, &mut d_src[t * width..(t + 1) * width]);
                carry.iter_mut().for_each(|c| *c = 0.0);
                if t > 0 {
                    layer.u.mul_t_add(&da, &mut carry);
                }
                if let Some(gr) = grads.as_deref_mut() {
                    let gl = &mut gr.layers[i];
                    gl.w.outer_add(&da, &src[t * width..(t + 1) * width]);
                    if t > 0 {
                        gl.u.outer_add(&da, &hs[(t - 1) * h..t * h]);
                    }
                    gl.b.iter_mut().zip(&da).for_each(|(b, x)| *b += x);
                }
            }
            d_out = d_src;
        }
        d_out
    }

    /// Gradient of `sum(dlogits * logits)` with respect to the waveform.
    pub fn backward_input(&self, trace: &Trace, dlogits: &[f64]) -> Vec<f64> {
        let d_in = self.backward_net(trace, dlogits, None);
        let n_t = trace.logits.n_frames;
        let n_c = self.arch.features.n_coeffs;
        let mut mean = vec![0.0; n_c];
        for t in 0..n_t {
            for c in 0..n_c {
                mean[c] += d_in[t * n_c + c];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n_t as f64);
        let mut d_feat = vec![0.0; n_t * n_c];
        for t in 0..n_t {
            for c in 0..n_c {
                d_feat[t * n_c + c] = (d_in[t * n_c + c] - mean[c]) * self.params.feature_scale[c];
            }
        }
        self.extractor.backward(&trace.mfcc, &d_feat)
    }

    /// Adds parameter gradients of `sum(dlogits * logits)` into `grads`.
    pub fn backward_params(&self, trace: &Trace, dlogits: &[f64], grads: &mut Parameters) {
        self.backward_net(trace, dlogits, Some(grads));
    }

    /// CTC loss, its waveform gradient, and the logits it was computed from.
    pub fn loss_and_input_grad(&self, samples: &[f64], target: &TranscriptionTarget) -> Result<(f64, Vec<f64>, Logits)> {
        let trace = self.forward_trace(samples)?;
        let (loss, dlogits) = ctc_loss_grad(&trace.logits, target)?;
        let grad = self.backward_input(&trace, &dlogits);
        Ok((loss, grad, trace.logits))
    }

    pub fn decode(&self, logits: &Logits) -> Vec<String> {
        words(&self.arch.vocab.decode(&collapse(&logits.best_path())))
    }

    pub fn transcribe(&self, clip: &AudioClip) -> Result<Vec<String>> {
        Ok(self.decode(&self.forward(clip)?))
    }
}


/// d ctc_loss / d samples.
pub fn input_gradient(model: &VictimModel, clip: &AudioClip, target: &TranscriptionTarget) -> Result<Vec<f64>> {
    model.check_rate(clip)?;
    Ok(model.loss_and_input_grad(&clip.samples, target)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VictimModel {
        let arch = Architecture { hidden: 8, ..Architecture::default() };
        VictimModel::init(arch, 1).unwrap()
    }

    #[test]
    fn logit_rows_match_frames() {
        let m = small();
        let clip = AudioClip::new((0..4000).map(|i| (i as f64 * 0.05).sin() * 0.1).collect(), 16_000);
        let l = m.forward(&clip).unwrap();
        assert_eq!(l.n_frames, 23);
        assert_eq!(l.n_classes, 29);
        assert_eq!(l, m.forward(&clip).unwrap());
    }

    #[test]
    fn short_clip_is_an_error() {
        let m = small();
        assert!(m.forward(&AudioClip::silence(100, 16_000)).is_err());
    }

    #[test]
    fn default_parameter_count() {
        let m = VictimModel::init(Architecture::default(), 0).unwrap();
        assert_eq!(m.params().count(), 128 * 20 + 2 * 128 * 128 + 128 * 128 + 2 * 128 + 29 * 128 + 29);
    }

    #[test]
    fn all_blank_decodes_to_nothing() {
        let m = small();
        let mut data = vec![0.0; 4 * 29];
        for t in 0..4 {
            data[t * 29] = 5.0;
        }
        assert!(m.decode(&Logits::new(4, 29, data)).is_empty());
    }
}
