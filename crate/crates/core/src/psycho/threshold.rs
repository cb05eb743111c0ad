use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::maskers::{decimate_maskers, find_noise_maskers, find_tonal_maskers, Masker, MaskerKind};
use super::BinLayout;
use crate::dsp::{forward_plan, hann_window, inverse_plan, spl_normalize, stft, AudioClip, SPL_FLOOR_DB};
use crate::error::{Error, Result};

/// How cells above the threshold are folded into the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PerceptualReduction {
    /// Mean over all cells of `max(0, spl - threshold)`.
    #[default]
    MeanExcess,
    /// Mean over all cells of the SPL of cells that exceed the threshold
    /// (zero elsewhere).
    MeanExceedingSpl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychoConfig {
    pub frame_len: usize,
    pub hop: usize,
    /// Bins above this fraction of Nyquist are left out of the loss.
    pub max_freq_fraction: f64,
    pub reduction: PerceptualReduction,
}

impl Default for PsychoConfig {
    fn default() -> Self {
        Self {
            frame_len: 512,
            hop: 256,
            max_freq_fraction: 0.95,
            reduction: PerceptualReduction::MeanExcess,
        }
    }
}

/// Model-1 spreading function in dB for a maskee `dz` Bark away from a
/// masker of level `spl`. Zero contribution outside [-3, 8).
pub fn spreading_function(dz: f64, spl: f64) -> Option<f64> {
    if (-3.0..-1.0).contains(&dz) {
        Some(17.0 * dz - 0.4 * spl + 11.0)
    } else if (-1.0..0.0).contains(&dz) {
        Some((0.4 * spl + 6.0) * dz)
    } else if (0.0..1.0).contains(&dz) {
        Some(-17.0 * dz)
    } else if (1.0..8.0).contains(&dz) {
        Some((0.15 * spl - 17.0) * dz - 0.15 * spl)
    } else {
        None
    }
}

fn masking_index(m: &Masker) -> f64 {
    match m.kind {
        MaskerKind::Tonal => -6.025 - 0.275 * m.bark,
        MaskerKind::Noise => -2.025 - 0.175 * m.bark,
    }
}

/// Power sum of the quiet threshold and all individual masking thresholds.
pub fn global_threshold(maskers: &[Masker], layout: &BinLayout) -> Vec<f64> {
    (0..layout.n_bins())
        .map(|i| {
            let quiet = layout.quiet[i];
            if quiet.is_infinite() {
                return quiet;
            }
            let mut masked = 0.0;
            for m in maskers {
                if let Some(sf) = spreading_function(layout.barks[i] - m.bark, m.spl) {
                    masked += 10f64.powf((m.spl + masking_index(m) + sf) / 10.0);
                }
            }
            if masked == 0.0 {
                quiet
            } else {
                10.0 * (10f64.powf(quiet / 10.0) + masked).log10()
            }
        })
        .collect()
}

/// Global masking threshold of a clip, frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskingThresholdGrid {
    pub n_frames: usize,
    pub n_bins: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
    /// SPL offset of the analyzed clip; perturbations are measured with it.
    pub offset_db: f64,
    /// dB SPL, frame-major.
    pub thresholds: Vec<f64>,
    /// Normalized PSD of the analyzed clip, frame-major.
    pub psd: Vec<f64>,
    /// Decimated maskers of every frame.
    pub maskers: Vec<Vec<Masker>>,
    pub loss_bins: std::ops::Range<usize>,
    pub reduction: PerceptualReduction,
}

impl MaskingThresholdGrid {
    pub fn compute(clip: &AudioClip, cfg: &PsychoConfig) -> Result<Self> {
        let spec = stft(clip, cfg.frame_len, cfg.hop)?;
        let spl = spl_normalize(&spec)?;
        let layout = BinLayout::new(clip.sample_rate, cfg.frame_len);
        let mut thresholds = Vec::with_capacity(spl.values.len());
        let mut maskers = Vec::with_capacity(spl.n_frames);
        for t in 0..spl.n_frames {
            let row = spl.row(t);
            let tonal = find_tonal_maskers(row, &layout);
            let mut all = find_noise_maskers(row, &tonal, &layout);
            all.extend(tonal);
            let kept = decimate_maskers(&all, &layout.quiet);
            thresholds.extend(global_threshold(&kept, &layout));
            maskers.push(kept);
        }
        let nyquist = clip.sample_rate as f64 / 2.0;
        let last = layout
            .freqs
            .iter()
            .rposition(|&f| f <= cfg.max_freq_fraction * nyquist)
            .unwrap_or(0);
        Ok(Self {
            n_frames: spl.n_frames,
            n_bins: spl.n_bins,
            frame_len: cfg.frame_len,
            hop: cfg.hop,
            sample_rate: clip.sample_rate,
            offset_db: spl.offset_db,
            thresholds,
            psd: spl.values,
            maskers,
            loss_bins: 1..last + 1,
            reduction: cfg.reduction,
        })
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.thresholds[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.frame_len as f64
    }

    fn cell_count(&self) -> usize {
        self.n_frames * self.loss_bins.len()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let frames = if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        };
        if frames != self.n_frames {
            return Err(Error::LengthMismatch {
                what: "perturbation frames vs threshold grid",
                left: frames,
                right: self.n_frames,
            });
        }
        Ok(())
    }
}

/// Perceptual loss of a perturbation against a precomputed threshold grid.
pub fn perceptual_loss(delta: &[f64], grid: &MaskingThresholdGrid) -> Result<f64> {
    Ok(evaluate(delta, grid, false)?.0)
}

/// Loss together with its gradient with respect to the perturbation samples.
/// The hinge contributes zero gradient at and below the threshold.
pub fn perceptual_loss_grad(delta: &[f64], grid: &MaskingThresholdGrid) -> Result<(f64, Vec<f64>)> {
    evaluate(delta, grid, true)
}

fn evaluate(delta: &[f64], grid: &MaskingThresholdGrid, with_grad: bool) -> Result<(f64, Vec<f64>)> {
    grid.check_len(delta.len())?;
    let n = grid.frame_len;
    let window = hann_window(n);
    let fft = forward_plan(n);
    let ifft = inverse_plan(n);
    let cells = grid.cell_count() as f64;
    let db_slope = 10.0 / std::f64::consts::LN_10;
    let mut buf = vec![Complex64::default(); n];
    let mut spec = vec![Complex64::default(); n];
    let mut grad = if with_grad { vec![0.0; delta.len()] } else { Vec::new() };
    let mut total = 0.0;
    for t in 0..grid.n_frames {
        let start = t * grid.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(delta[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        let thr = grid.row(t);
        let mut any = false;
        spec.iter_mut().for_each(|c| *c = Complex64::default());
        for k in grid.loss_bins.clone() {
            let p = buf[k].norm_sqr();
            if p <= 0.0 {
                continue;
            }
            let level = (10.0 * p.log10() + grid.offset_db).max(SPL_FLOOR_DB);
            if level <= thr[k] {
                continue;
            }
            total += match grid.reduction {
                PerceptualReduction::MeanExcess => level - thr[k],
                PerceptualReduction::MeanExceedingSpl => level,
            };
            if with_grad && level > SPL_FLOOR_DB {
                spec[k] = buf[k] * (db_slope / p / cells);
                any = true;
            }
        }
        if any {
            ifft.process(&mut spec);
            for i in 0..n {
                grad[start + i] += 2.0 * window[i] * spec[i].re;
            }
        }
    }
    Ok((total / cells, grad))
}
