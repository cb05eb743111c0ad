use super::Spectrogram;
use crate::error::{Error, Result};

/// Level assigned to the loudest cell of a normalized grid.
pub const SPL_REFERENCE_DB: f64 = 96.0;
/// Level used for cells with zero power.
pub const SPL_FLOOR_DB: f64 = -200.0;

/// Power grid in dB SPL, frame-major like the source [`Spectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplGrid {
    pub n_frames: usize,
    pub n_bins: usize,
    pub values: Vec<f64>,
    /// dB added to `10 log10(power)` to obtain SPL. Reused for signals that
    /// must share the same physical reference.
    pub offset_db: f64,
}

impl SplGrid {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_bins..(t + 1) * self.n_bins]
    }

    /// Converts raw power values with an explicit offset.
    pub fn from_power(n_frames: usize, n_bins: usize, power: &[f64], offset_db: f64) -> Self {
        let values = power
            .iter()
            .map(|&p| {
                if p > 0.0 {
                    (10.0 * p.log10() + offset_db).max(SPL_FLOOR_DB)
                } else {
                    SPL_FLOOR_DB
                }
            })
            .collect();
        Self {
            n_frames,
            n_bins,
            values,
            offset_db,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `10 log10(p)`, with zero power mapped to the floor.
pub fn power_to_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(SPL_FLOOR_DB)
    } else {
        SPL_FLOOR_DB
    }
}

/// Power spectrum in dB with the global maximum mapped to 96 dB SPL.
pub fn spl_normalize(spec: &Spectrogram) -> Result<SplGrid> {
    if spec.is_empty() {
        return Err(Error::EmptyInput("spectrogram"));
    }
    let power = spec.power();
    let max_p = power.iter().copied().fold(0.0, f64::max);
    let offset = if max_p > 0.0 {
        SPL_REFERENCE_DB - 10.0 * max_p.log10()
    } else {
        0.0
    };
    Ok(SplGrid::from_power(spec.n_frames, spec.n_bins, &power, offset))
}
