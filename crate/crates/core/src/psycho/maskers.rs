use serde::{Deserialize, Serialize};

use super::BinLayout;
use crate::dsp::{power_to_db, SPL_FLOOR_DB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskerKind {
    Tonal,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Masker {
    pub bin: usize,
    pub spl: f64,
    pub kind: MaskerKind,
    pub bark: f64,
}

/// Minimum prominence of a tonal peak over its neighborhood.
const TONAL_PROMINENCE_DB: f64 = 7.0;

/// Model-1 neighborhood half-widths in Hz: the ±2, ±3 and ±6 bin spans of
/// a 512-point transform at 44.1 kHz.
const NEIGHBORHOOD_HZ: [(f64, f64); 3] = [
    (5_500.0, 2.0 * 44_100.0 / 512.0),
    (11_000.0, 3.0 * 44_100.0 / 512.0),
    (f64::INFINITY, 6.0 * 44_100.0 / 512.0),
];

/// Bin offsets a tonal peak at `freq` must dominate, for bins `bin_hz` wide.
/// The neighborhood covers the same span in Hz regardless of transform size
/// and widens with frequency.
pub fn tonal_neighborhood(freq: f64, bin_hz: f64) -> std::ops::RangeInclusive<usize> {
    let span = NEIGHBORHOOD_HZ
        .iter()
        .find(|(limit, _)| freq < *limit)
        .map_or(NEIGHBORHOOD_HZ[2].1, |(_, span)| *span);
    2..=((span / bin_hz).round() as usize).max(2)
}

fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn power_sum_db(levels: impl IntoIterator<Item = f64>) -> f64 {
    power_to_db(levels.into_iter().map(db_to_power).sum())
}

/// Local maxima at least 7 dB above every bin of their neighborhood. The
/// masker level is the power sum of the peak and its two adjacent bins.
pub fn find_tonal_maskers(frame: &[f64], layout: &BinLayout) -> Vec<Masker> {
    let n = frame.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    for k in 1..n - 1 {
        let p = frame[k];
        if !(p > frame[k - 1] && p >= frame[k + 1]) {
            continue;
        }
        let dominant = tonal_neighborhood(layout.freqs[k], layout.bin_hz()).all(|d| {
            let below = k.checked_sub(d).map_or(true, |j| p - frame[j] >= TONAL_PROMINENCE_DB);
            let above = frame.get(k + d).map_or(true, |v| p - v >= TONAL_PROMINENCE_DB);
            below && above
        });
        if dominant {
            out.push(Masker {
                bin: k,
                spl: power_sum_db([frame[k - 1], p, frame[k + 1]]),
                kind: MaskerKind::Tonal,
                bark: layout.barks[k],
            });
        }
    }
    out
}

/// One noise masker per critical band from the power of all bins that are
/// not claimed by a tonal masker, placed at the band's geometric-mean bin.
pub fn find_noise_maskers(frame: &[f64], tonal: &[Masker], layout: &BinLayout) -> Vec<Masker> {
    let mut excluded = vec![false; frame.len()];
    for m in tonal {
        let reach = *tonal_neighborhood(layout.freqs[m.bin], layout.bin_hz()).end();
        let lo = m.bin.saturating_sub(reach);
        let hi = (m.bin + reach).min(frame.len() - 1);
        excluded[lo..=hi].iter_mut().for_each(|e| *e = true);
    }
    layout
        .critical_bands()
        .into_iter()
        .filter(|band| band.end <= frame.len())
        .map(|band| {
            let power: f64 = band
                .clone()
                .filter(|&k| !excluded[k])
                .map(|k| db_to_power(frame[k]))
                .sum();
            let log_mean =
                band.clone().map(|k| (k as f64).ln()).sum::<f64>() / band.len() as f64;
            let bin = (log_mean.exp().round() as usize).clamp(band.start, band.end - 1);
            Masker {
                bin,
                spl: if power > 0.0 { power_to_db(power) } else { SPL_FLOOR_DB },
                kind: MaskerKind::Noise,
                bark: layout.barks[bin],
            }
        })
        .collect()
}

/// Drops maskers below the threshold in quiet, then resolves every pair
/// closer than 0.5 Bark in favor of the louder one.
pub fn decimate_maskers(maskers: &[Masker], quiet: &[f64]) -> Vec<Masker> {
    let mut audible: Vec<Masker> = maskers
        .iter()
        .filter(|m| m.spl >= quiet[m.bin])
        .cloned()
        .collect();
    audible.sort_by(|a, b| a.bin.cmp(&b.bin).then(b.spl.total_cmp(&a.spl)));
    let mut kept: Vec<Masker> = Vec::with_capacity(audible.len());
    for m in audible {
        match kept.last_mut() {
            Some(last) if m.bark - last.bark < 0.5 => {
                if m.spl > last.spl {
                    *last = m;
                }
            }
            _ => kept.push(m),
        }
    }
    kept
}
