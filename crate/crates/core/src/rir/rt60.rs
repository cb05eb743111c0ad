use super::Rir;
use crate::error::{Error, Result};

/// Schroeder backward-integrated energy decay in dB relative to the total.
/// Samples after the last nonzero tap come out as `-inf`.
pub fn schroeder_curve(taps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = taps
        .iter()
        .rev()
        .map(|t| {
            acc += t * t;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|e| if *e > 0.0 && total > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// Minimum number of samples inside the fitted segment.
const MIN_FIT_POINTS: usize = 8;

/// RT60 from a least-squares line through the -5..-35 dB part of the
/// Schroeder curve, extrapolated to 60 dB.
pub fn measure_rt60(rir: &Rir) -> Result<f64> {
    let edc = schroeder_curve(&rir.taps);
    let points: Vec<(f64, f64)> = edc
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite() && **l <= -5.0 && **l >= -35.0)
        .map(|(i, l)| (i as f64, *l))
        .collect();
    let reaches_end = edc.iter().any(|l| *l < -35.0);
    if points.len() < MIN_FIT_POINTS || !reaches_end {
        return Err(Error::InsufficientDecay(format!(
            "{} samples between -5 and -35 dB",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::InsufficientDecay("energy does not decay".into()));
    }
    Ok(-60.0 / slope / rir.sample_rate as f64)
}
