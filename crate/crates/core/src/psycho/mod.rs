//! Simultaneous masking threshold after the MPEG-1 psychoacoustic model 1,
//! and the hinge-style perceptual loss built on top of it.
//!
//! The threshold grid of the original clip is computed once and then only
//! read. The perceptual loss frames the perturbation with the same geometry
//! and expresses it on the SPL scale of the original clip.

mod maskers;
mod threshold;

pub use maskers::{
    decimate_maskers, find_noise_maskers, find_tonal_maskers, tonal_neighborhood, Masker,
    MaskerKind,
};
pub use threshold::{
    global_threshold, perceptual_loss, perceptual_loss_grad, spreading_function,
    MaskingThresholdGrid, PerceptualReduction, PsychoConfig,
};

/// Absolute threshold of hearing in dB SPL. Frequencies outside
/// (20 Hz, 18 kHz) are never audible and map to `+inf`.
pub fn quiet_threshold_hz(f: f64) -> f64 {
    if !(f > 20.0 && f < 18_000.0) {
        return f64::INFINITY;
    }
    let k = f / 1000.0;
    3.64 * k.powf(-0.8) - 6.5 * (-0.6 * (k - 3.3).powi(2)).exp() + 1e-3 * k.powi(4)
}

pub fn quiet_threshold(bin_freqs: &[f64]) -> Vec<f64> {
    bin_freqs.iter().map(|&f| quiet_threshold_hz(f)).collect()
}

/// Hz to Bark.
pub fn bark(f: f64) -> f64 {
    13.0 * (0.00076 * f).atan() + 3.5 * (f / 7500.0).powi(2).atan()
}

/// Per-bin frequency data for a one-sided spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct BinLayout {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub freqs: Vec<f64>,
    pub barks: Vec<f64>,
    pub quiet: Vec<f64>,
}

impl BinLayout {
    pub fn new(sample_rate: u32, frame_len: usize) -> Self {
        let n_bins = frame_len / 2 + 1;
        let freqs: Vec<f64> = (0..n_bins)
            .map(|k| k as f64 * sample_rate as f64 / frame_len as f64)
            .collect();
        Self {
            barks: freqs.iter().map(|&f| bark(f)).collect(),
            quiet: quiet_threshold(&freqs),
            freqs,
            sample_rate,
            frame_len,
        }
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.frame_len as f64
    }

    pub fn n_bins(&self) -> usize {
        self.freqs.len()
    }

    /// Critical bands as ranges of bins sharing the same integer Bark value.
    /// Bin 0 (DC) is not part of any band.
    pub fn critical_bands(&self) -> Vec<std::ops::Range<usize>> {
        let mut bands = Vec::new();
        let mut start = 1;
        for k in 2..self.n_bins() {
            if self.barks[k].floor() != self.barks[start].floor() {
                bands.push(start..k);
                start = k;
            }
        }
        if start < self.n_bins() {
            bands.push(start..self.n_bins());
        }
        bands
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quiet_threshold_spot_values() {
        let closed = |k: f64| {
            3.64 * k.powf(-0.8) - 6.5 * (-0.6 * (k - 3.3) * (k - 3.3)).exp() + 1e-3 * k.powi(4)
        };
        let t = quiet_threshold(&[1000.0, 3300.0]);
        assert!((t[0] - 3.37).abs() < 0.05);
        assert!((t[0] - closed(1.0)).abs() < 1e-12);
        assert!((t[1] - -4.98).abs() < 0.05);
        assert!((t[1] - closed(3.3)).abs() < 1e-12);
    }

    #[test]
    fn quiet_threshold_rises_above_10k() {
        let t = quiet_threshold(&[10_000.0, 12_000.0]);
        assert!(t[1] > t[0]);
    }

    #[test]
    fn out_of_range_frequencies_are_inaudible() {
        let t = quiet_threshold(&[0.0, 20.0, 18_000.0, 20_000.0]);
        assert!(t.iter().all(|v| v.is_infinite() && *v > 0.0));
    }

    #[test]
    fn bark_is_strictly_increasing_over_bins() {
        let layout = BinLayout::new(16_000, 512);
        assert!(layout.barks.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn critical_bands_partition_the_nonzero_bins() {
        let layout = BinLayout::new(16_000, 512);
        let bands = layout.critical_bands();
        assert_eq!(bands.first().unwrap().start, 1);
        assert_eq!(bands.last().unwrap().end, 257);
        assert!(bands.windows(2).all(|w| w[0].end == w[1].start));
        // Nyquist at 16 kHz sits just above 21 Bark.
        assert_eq!(bands.len(), 22);
    }
}
