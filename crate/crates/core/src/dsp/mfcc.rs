use std::sync::Arc;

use num_complex::Complex64;
use rustfft::Fft;
use serde::{Deserialize, Serialize};

use super::fft::{forward_plan, inverse_plan};
use super::stft::{frame_count, hann_window};
use super::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    /// Analysis window in samples (25 ms at 16 kHz).
    pub frame_len: usize,
    /// Frame advance in samples (10 ms at 16 kHz).
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Added to mel energies before the log.
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            frame_len: 400,
            hop: 160,
            n_fft: 512,
            n_mels: 40,
            n_coeffs: 20,
            f_min: 0.0,
            f_max: 8_000.0,
            log_floor: 1e-8,
        }
    }
}

impl FeatureConfig {
    pub fn frame_count(&self, len: usize) -> usize {
        frame_count(len, self.frame_len, self.hop)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.frame_len > self.n_fft {
            return Err(Error::Config("mfcc frame_len must be in 1..=n_fft".into()));
        }
        if self.hop == 0 || self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(Error::Config("mfcc hop/mels/coeffs out of range".into()));
        }
        if !(self.f_min >= 0.0 && self.f_max > self.f_min) {
            return Err(Error::Config("mfcc frequency range is empty".into()));
        }
        Ok(())
    }
}

/// Row-major `n_frames x n_coeffs` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n_frames: usize,
    pub n_coeffs: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_coeffs..(t + 1) * self.n_coeffs]
    }
}

/// Intermediates kept from a forward pass so the sample gradient can be
/// computed without redoing the FFTs.
#[derive(Debug, Clone)]
pub struct MfccCache {
    len: usize,
    spectra: Vec<Complex64>,
    mel: Vec<f64>,
}

#[derive(Clone)]
struct MelFilter {
    start: usize,
    weights: Vec<f64>,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Precomputed MFCC pipeline: Hann window, power spectrum, triangular mel
/// filterbank, natural log, orthonormal DCT-II.
#[derive(Clone)]
pub struct MfccExtractor {
    cfg: FeatureConfig,
    window: Vec<f64>,
    filters: Vec<MelFilter>,
    dct: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor").field("cfg", &self.cfg).finish()
    }
}

impl MfccExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let n_bins = cfg.n_fft / 2 + 1;
        let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
        let lo = hz_to_mel(cfg.f_min);
        let hi = hz_to_mel(cfg.f_max.min(cfg.sample_rate as f64 / 2.0));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let filters = (0..cfg.n_mels)
            .map(|m| {
                let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
                let mut start = None;
                let mut weights = Vec::new();
                for k in 0..n_bins {
                    let f = k as f64 * bin_hz;
                    let w = if f > l && f <= c {
                        (f - l) / (c - l)
                    } else if f > c && f < r {
                        (r - f) / (r - c)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        start.get_or_insert(k);
                    }
                    if start.is_some() {
                        weights.push(w);
                    }
                }
                while weights.last() == Some(&0.0) {
                    weights.pop();
                }
                MelFilter {
                    start: start.unwrap_or(0),
                    weights,
                }
            })
            .collect();
        let m = cfg.n_mels as f64;
        let mut dct = Vec::with_capacity(cfg.n_coeffs * cfg.n_mels);
        for c in 0..cfg.n_coeffs {
            let scale = if c == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            for j in 0..cfg.n_mels {
                dct.push(
                    scale * (std::f64::consts::PI * c as f64 * (j as f64 + 0.5) / m).cos(),
                );
            }
        }
        Ok(Self {
            window: hann_window(cfg.frame_len),
            fft: forward_plan(cfg.n_fft),
            ifft: inverse_plan(cfg.n_fft),
            filters,
            dct,
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn forward(&self, samples: &[f64]) -> Result<(FeatureMatrix, MfccCache)> {
        let cfg = &self.cfg;
        if samples.len() < cfg.frame_len {
            return Err(Error::InputTooShort {
                len: samples.len(),
                needed: cfg.frame_len,
            });
        }
        let n_frames = cfg.frame_count(samples.len());
        let n_bins = cfg.n_fft / 2 + 1;
        let mut spectra = Vec::with_capacity(n_frames * n_bins);
        let mut mel = Vec::with_capacity(n_frames * cfg.n_mels);
        let mut data = Vec::with_capacity(n_frames * cfg.n_coeffs);
        let mut buf = vec![Complex64::default(); cfg.n_fft];
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        let mut log_mel = vec![0.0; cfg.n_mels];
        for t in 0..n_frames {
            let start = t * cfg.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < cfg.frame_len {
                    Complex64::new(samples[start + i] * self.window[i], 0.0)
                } else {
                    Complex64::default()
                };
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            spectra.extend_from_slice(&buf[..n_bins]);
            for (j, f) in self.filters.iter().enumerate() {
                let e: f64 = f
                    .weights
                    .iter()
                    .zip(&buf[f.start..])
                    .map(|(w, x)| w * x.norm_sqr())
                    .sum();
                mel.push(e);
                log_mel[j] = (e + cfg.log_floor).ln();
            }
            for c in 0..cfg.n_coeffs {
                let row = &self.dct[c * cfg.n_mels..(c + 1) * cfg.n_mels];
                data.push(row.iter().zip(&log_mel).map(|(a, b)| a * b).sum());
            }
        }
        Ok((
            FeatureMatrix {
                n_frames,
                n_coeffs: cfg.n_coeffs,
                data,
            },
            MfccCache {
                len: samples.len(),
                spectra,
                mel,
            },
        ))
    }

    /// Gradient with respect to the input samples, given the gradient with
    /// respect to the feature matrix from the matching forward pass.
    pub fn backward(&self, cache: &MfccCache, grad: &[f64]) -> Vec<f64> {
        let cfg = &self.cfg;
        let n_bins = cfg.n_fft / 2 + 1;
        let n_frames = cache.mel.len() / cfg.n_mels;
        assert_eq!(grad.len(), n_frames * cfg.n_coeffs, "feature gradient shape");
        let mut out = vec![0.0; cache.len];
        let mut g_mel = vec![0.0; cfg.n_mels];
        let mut g_pow = vec![0.0; n_bins];
        let mut buf = vec![Complex64::default(); cfg.n_fft];
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        for t in 0..n_frames {
            let g = &grad[t * cfg.n_coeffs..(t + 1) * cfg.n_coeffs];
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let mel = &cache.mel[t * cfg.n_mels..(t + 1) * cfg.n_mels];
            for (j, gm) in g_mel.iter_mut().enumerate() {
                let mut s = 0.0;
                for (c, gc) in g.iter().enumerate() {
                    s += self.dct[c * cfg.n_mels + j] * gc;
                }
                *gm = s / (mel[j] + cfg.log_floor);
            }
            g_pow.iter_mut().for_each(|v| *v = 0.0);
            for (f, gm) in self.filters.iter().zip(&g_mel) {
                for (k, w) in f.weights.iter().enumerate() {
                    g_pow[f.start + k] += w * gm;
                }
            }
            let spec = &cache.spectra[t * n_bins..(t + 1) * n_bins];
            for (k, b) in buf.iter_mut().enumerate() {
                *b = if k < n_bins {
                    spec[k] * g_pow[k]
                } else {
                    Complex64::default()
                };
            }
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            let start = t * cfg.hop;
            for i in 0..cfg.frame_len {
                out[start + i] += 2.0 * self.window[i] * buf[i].re;
            }
        }
        out
    }
}

pub fn mfcc(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    if clip.sample_rate != cfg.sample_rate {
        return Err(Error::SampleRateMismatch(clip.sample_rate, cfg.sample_rate));
    }
    let ex = MfccExtractor::new(cfg.clone())?;
    Ok(ex.forward(&clip.samples)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_clip_rows_are_identical() {
        let clip = AudioClip::silence(4000, 16000);
        let f = mfcc(&clip, &FeatureConfig::default()).unwrap();
        assert_eq!(f.n_frames, 23);
        for t in 1..f.n_frames {
            assert_eq!(f.row(t), f.row(0));
        }
    }

    #[test]
    fn one_hop_shift_moves_rows_by_one() {
        let cfg = FeatureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base: Vec<f64> = (0..6000).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut shifted = vec![0.0; cfg.hop];
        shifted.extend_from_slice(&base);
        let a = mfcc(&AudioClip::new(base, 16000), &cfg).unwrap();
        let b = mfcc(&AudioClip::new(shifted, 16000), &cfg).unwrap();
        for t in 0..a.n_frames {
            for (x, y) in a.row(t).iter().zip(b.row(t + 1)) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn short_clip_is_an_error() {
        let clip = AudioClip::silence(399, 16000);
        assert!(mfcc(&clip, &FeatureConfig::default()).is_err());
    }

    #[test]
    fn filterbank_covers_the_band() {
        let ex = MfccExtractor::new(FeatureConfig::default()).unwrap();
        assert_eq!(ex.filters.len(), 40);
        assert!(ex.filters.iter().all(|f| !f.weights.is_empty()));
    }
}
