use num_complex::Complex64;

use super::fft::{forward_plan, inverse_plan};
use super::AudioClip;
use crate::error::{Error, Result};
use crate::rir::Rir;

/// Below this many multiply-adds the direct form is used.
const DIRECT_LIMIT: usize = 1 << 16;

/// Linear convolution with a fixed kernel, truncated to the input length.
///
/// Holds the kernel spectrum so the forward map and its adjoint can be
/// applied repeatedly at the cost of two FFTs each.
#[derive(Debug, Clone)]
pub struct Convolver {
    taps: Vec<f64>,
    len: usize,
    fft_len: usize,
    spectrum: Option<Vec<Complex64>>,
}

impl Convolver {
    pub fn new(taps: &[f64], len: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyInput("impulse response"));
        }
        let used = taps.len().min(len.max(1));
        let taps = taps[..used].to_vec();
        let direct = used.saturating_mul(len) <= DIRECT_LIMIT;
        let fft_len = (len + used).next_power_of_two();
        let spectrum = if direct {
            None
        } else {
            let mut buf: Vec<Complex64> = taps.iter().map(|&t| Complex64::new(t, 0.0)).collect();
            buf.resize(fft_len, Complex64::default());
            forward_plan(fft_len).process(&mut buf);
            Some(buf)
        };
        Ok(Self {
            taps,
            len,
            fft_len,
            spectrum,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `y[n] = sum_m h[m] x[n - m]` for `n < len`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len, "convolver input length");
        match &self.spectrum {
            None => {
                let mut y = vec![0.0; self.len];
                for (m, &h) in self.taps.iter().enumerate() {
                    if h == 0.0 {
                        continue;
                    }
                    for (yn, xn) in y[m..].iter_mut().zip(x) {
                        *yn += h * xn;
                    }
                }
                y
            }
            Some(spec) => self.spectral(x, spec, false),
        }
    }

    /// Adjoint of [`Convolver::apply`]: `g_x[n] = sum_m h[m] g_y[n + m]`.
    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.len, "convolver gradient length");
        match &self.spectrum {
            None => {
                let mut out = vec![0.0; self.len];
                for (m, &h) in self.taps.iter().enumerate() {
                    if h == 0.0 {
                        continue;
                    }
                    for (o, gv) in out.iter_mut().zip(&g[m..]) {
                        *o += h * gv;
                    }
                }
                out
            }
            Some(spec) => self.spectral(g, spec, true),
        }
    }

    fn spectral(&self, x: &[f64], spec: &[Complex64], conjugate: bool) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(self.fft_len, Complex64::default());
        forward_plan(self.fft_len).process(&mut buf);
        for (b, h) in buf.iter_mut().zip(spec) {
            *b *= if conjugate { h.conj() } else { *h };
        }
        inverse_plan(self.fft_len).process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        buf[..self.len].iter().map(|c| c.re * scale).collect()
    }
}

pub fn convolve_samples(x: &[f64], taps: &[f64]) -> Result<Vec<f64>> {
    Ok(Convolver::new(taps, x.len())?.apply(x))
}

/// Convolves a clip with an impulse response, keeping the clip's length.
pub fn convolve(clip: &AudioClip, rir: &Rir) -> Result<AudioClip> {
    if clip.sample_rate != rir.sample_rate {
        return Err(Error::SampleRateMismatch(clip.sample_rate, rir.sample_rate));
    }
    Ok(AudioClip::new(
        convolve_samples(&clip.samples, &rir.taps)?,
        clip.sample_rate,
    ))
}
