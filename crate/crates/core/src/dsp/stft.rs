use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::{forward_plan, inverse_plan};
use super::AudioClip;
use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    Hann,
}

/// One-sided short-time spectrum, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_frames: usize,
    pub n_bins: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    /// Builds a spectrogram from raw bins, e.g. for synthetic test frames.
    pub fn from_bins(frame_len: usize, hop: usize, n_frames: usize, data: Vec<Complex64>) -> Self {
        let n_bins = frame_len / 2 + 1;
        assert_eq!(data.len(), n_frames * n_bins, "bin grid shape");
        Self {
            n_frames,
            n_bins,
            frame_len,
            hop,
            window: WindowKind::Hann,
            data,
        }
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    /// Squared magnitude of every cell, same layout as `data`.
    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

pub fn frame_count(len: usize, frame_len: usize, hop: usize) -> usize {
    if len < frame_len {
        0
    } else {
        (len - frame_len) / hop + 1
    }
}

/// Hann-windowed STFT with a transform size equal to the frame length.
pub fn stft(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<Spectrogram> {
    stft_samples(&clip.samples, frame_len, hop)
}

pub(crate) fn stft_samples(samples: &[f64], frame_len: usize, hop: usize) -> Result<Spectrogram> {
    if !frame_len.is_power_of_two() {
        return Err(Error::Config(format!(
            "frame length {frame_len} is not a power of two"
        )));
    }
    if hop == 0 || hop > frame_len {
        return Err(Error::Config(format!(
            "hop {hop} must lie in 1..={frame_len}"
        )));
    }
    if samples.len() < frame_len {
        return Err(Error::InputTooShort {
            len: samples.len(),
            needed: frame_len,
        });
    }
    let n_frames = frame_count(samples.len(), frame_len, hop);
    let n_bins = frame_len / 2 + 1;
    let window = hann_window(frame_len);
    let fft = forward_plan(frame_len);
    let mut buf = vec![Complex64::default(); frame_len];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(n_frames * n_bins);
    for t in 0..n_frames {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(samples[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram {
        n_frames,
        n_bins,
        frame_len,
        hop,
        window: WindowKind::Hann,
        data,
    })
}

/// Weighted overlap-add inverse of [`stft`] using the Hann window for
/// synthesis. Samples not covered by any frame come back as zero.
pub fn istft(spec: &Spectrogram, len: usize) -> Vec<f64> {
    let n = spec.frame_len;
    let window = hann_window(n);
    let ifft = inverse_plan(n);
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut buf = vec![Complex64::default(); n];
    for t in 0..spec.n_frames {
        let frame = spec.frame(t);
        buf[..spec.n_bins].copy_from_slice(frame);
        for k in spec.n_bins..n {
            buf[k] = frame[n - k].conj();
        }
        ifft.process(&mut buf);
        let start = t * spec.hop;
        for i in 0..n {
            let idx = start + i;
            if idx >= len {
                break;
            }
            out[idx] += buf[i].re / n as f64 * window[i];
            norm[idx] += window[i] * window[i];
        }
    }
    for (o, w) in out.iter_mut().zip(&norm) {
        if *w > 1e-12 {
            *o /= w;
        }
    }
    out
}
