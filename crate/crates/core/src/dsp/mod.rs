//! Signal processing building blocks shared by the rest of the crate.
//!
//! Everything in here is a pure function of its inputs. FFT plans are cached
//! per thread, so callers never need to carry planner state around.

mod conv;
mod fft;
mod mfcc;
mod spl;
mod stft;
pub mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conv::{convolve, convolve_samples, Convolver};
pub use fft::{inverse_plan, forward_plan};
pub use mfcc::{mfcc, FeatureConfig, FeatureMatrix, MfccCache, MfccExtractor};
pub use spl::{power_to_db, spl_normalize, SplGrid, SPL_FLOOR_DB, SPL_REFERENCE_DB};
pub use stft::{hann_window, istft, stft, Spectrogram};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Clamp every sample into [-1, 1].
    pub fn clamped(mut self) -> Self {
        for s in &mut self.samples {
            *s = s.clamp(-1.0, 1.0);
        }
        self
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }

    pub fn ensure_same_rate(&self, other: &AudioClip) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::SampleRateMismatch(
                self.sample_rate,
                other.sample_rate,
            ));
        }
        Ok(())
    }

    /// Elementwise sum; both clips must share rate and length.
    pub fn add(&self, other: &AudioClip) -> Result<AudioClip> {
        self.ensure_same_rate(other)?;
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                what: "clip lengths",
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(AudioClip::new(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            self.sample_rate,
        ))
    }
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Signal-to-noise ratio in dB, `20 log10(rms(signal) / rms(noise))`.
pub fn snr_db(signal: &AudioClip, noise: &AudioClip) -> Result<f64> {
    signal.ensure_same_rate(noise)?;
    if signal.len() != noise.len() {
        return Err(Error::LengthMismatch {
            what: "snr signal/noise",
            left: signal.len(),
            right: noise.len(),
        });
    }
    let noise_rms = noise.rms();
    if noise_rms == 0.0 {
        return Err(Error::InfiniteSnr);
    }
    Ok(20.0 * (signal.rms() / noise_rms).log10())
}

/// Writes a row-major grid as CSV with a `frame` column followed by one
/// column per bin.
pub fn write_grid_csv<W: std::io::Write>(
    mut out: W,
    n_cols: usize,
    values: &[f64],
    col_prefix: &str,
) -> std::io::Result<()> {
    write!(out, "frame")?;
    for c in 0..n_cols {
        write!(out, ",{col_prefix}{c}")?;
    }
    writeln!(out)?;
    for (r, row) in values.chunks(n_cols.max(1)).enumerate() {
        write!(out, "{r}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
