use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Rir, RoomConfig, SPEED_OF_SOUND};
use crate::error::Result;

/// Half-width of the fractional-delay kernel; 8 taps in total.
const SINC_HALF: i64 = 4;
/// Window over which the early energy is measured to scale the tail.
const TAIL_MATCH_SECS: f64 = 0.010;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirSettings {
    pub sample_rate: u32,
    /// Span after the direct path covered by exact image sources. Set it to
    /// at least the RT60 to disable the stochastic tail.
    pub early_ms: f64,
}

impl Default for RirSettings {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            early_ms: 50.0,
        }
    }
}

/// Uniform wall absorption from Sabine's formula, clamped to (0, 1].
pub fn sabine_absorption(room: &RoomConfig) -> f64 {
    (0.161 * room.volume() / (room.surface() * room.rt60)).clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn generate_rir(room: &RoomConfig) -> Result<Rir> {
    generate_rir_with(room, &RirSettings::default())
}

struct AxisImage {
    offset: f64,
    reflections: i32,
}

fn axis_images(len: f64, src: f64, lst: f64, reach: f64) -> Vec<AxisImage> {
    let m_max = (reach / (2.0 * len)).ceil() as i32 + 1;
    let mut out = Vec::with_capacity((4 * m_max + 2) as usize);
    for m in -m_max..=m_max {
        for q in 0..2 {
            let offset = (1 - 2 * q) as f64 * src - lst + 2.0 * m as f64 * len;
            if offset.abs() <= reach {
                out.push(AxisImage {
                    offset,
                    reflections: (m - q).abs() + m.abs(),
                });
            }
        }
    }
    out
}

fn config_seed(room: &RoomConfig) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let fields = room
        .dims
        .iter()
        .chain(&room.source_pos)
        .chain(&room.listener_pos)
        .chain(std::iter::once(&room.rt60));
    for v in fields {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Peak-normalized impulse response of `room`.
pub fn generate_rir_with(room: &RoomConfig, settings: &RirSettings) -> Result<Rir> {
    room.validate()?;
    let fs = settings.sample_rate as f64;
    let samples_per_meter = fs / SPEED_OF_SOUND;
    let distance = room.distance();
    let direct = (distance * samples_per_meter).round() as usize;
    let len = direct + (room.rt60 * fs).ceil() as usize + 2 * SINC_HALF as usize;
    let junction = (direct + (settings.early_ms * fs / 1000.0).round() as usize).min(len);

    let alpha = sabine_absorption(room);
    let reflection = (1.0 - alpha).max(0.0).sqrt();
    let mut taps = vec![0.0; len];
    taps[direct] = 1.0 / (4.0 * std::f64::consts::PI * distance);

    if reflection > 0.0 {
        let reach = (junction as f64 + SINC_HALF as f64) / samples_per_meter;
        let reach_sq = reach * reach;
        let axes: Vec<Vec<AxisImage>> = (0..3)
            .map(|a| axis_images(room.dims[a], room.source_pos[a], room.listener_pos[a], reach))
            .collect();
        for ix in &axes[0] {
            let dx2 = ix.offset * ix.offset;
            for iy in &axes[1] {
                let dxy2 = dx2 + iy.offset * iy.offset;
                if dxy2 > reach_sq {
                    continue;
                }
                for iz in &axes[2] {
                    let order = ix.reflections + iy.reflections + iz.reflections;
                    if order == 0 {
                        continue;
                    }
                    let d2 = dxy2 + iz.offset * iz.offset;
                    if d2 > reach_sq {
                        continue;
                    }
                    let dist = d2.sqrt();
                    let gain = reflection.powi(order) / (4.0 * std::f64::consts::PI * dist);
                    add_fractional(&mut taps, dist * samples_per_meter, gain, direct, junction);
                }
            }
        }
        add_tail(&mut taps, room, direct, junction, fs);
    }

    let peak = taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    taps.iter_mut().for_each(|t| *t /= peak);
    Ok(Rir {
        taps,
        sample_rate: settings.sample_rate,
    })
}

/// Hann-windowed sinc placed at fractional delay `tau`, restricted to
/// `[first, end)`.
fn add_fractional(taps: &mut [f64], tau: f64, gain: f64, first: usize, end: usize) {
    let base = tau.floor() as i64;
    for n in base - SINC_HALF + 1..=base + SINC_HALF {
        if n < first as i64 || n >= end as i64 {
            continue;
        }
        let x = n as f64 - tau;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        let window = 0.5 * (1.0 + (std::f64::consts::PI * x / SINC_HALF as f64).cos());
        taps[n as usize] += gain * sinc * window;
    }
}

/// Gaussian tail from `junction` on, decaying 60 dB over the RT60 and scaled
/// to the mean energy of the image-source part just before the junction.
fn add_tail(taps: &mut [f64], room: &RoomConfig, direct: usize, junction: usize, fs: f64) {
    if junction >= taps.len() {
        return;
    }
    let window = (TAIL_MATCH_SECS * fs).round() as usize;
    let lo = junction.saturating_sub(window).max(direct + 1);
    if lo >= junction {
        return;
    }
    let level = (taps[lo..junction].iter().map(|t| t * t).sum::<f64>() / (junction - lo) as f64).sqrt();
    if level == 0.0 {
        return;
    }
    let decay = 1000f64.ln() / (room.rt60 * fs);
    let mut rng = ChaCha8Rng::seed_from_u64(config_seed(room));
    for (i, t) in taps[junction..].iter_mut().enumerate() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *t = level * z * (-decay * i as f64).exp();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room(rt60: f64) -> RoomConfig {
        RoomConfig {
            dims: [5.0, 4.0, 3.0],
            source_pos: [1.0, 1.0, 1.5],
            listener_pos: [3.0, 2.5, 1.2],
            rt60,
        }
    }

    #[test]
    fn direct_path_delay_of_343_cm() {
        let cfg = RoomConfig {
            dims: [6.0, 4.0, 3.0],
            source_pos: [1.0, 2.0, 1.5],
            listener_pos: [4.43, 2.0, 1.5],
            rt60: 0.3,
        };
        let rir = generate_rir(&cfg).unwrap();
        let first = rir.first_nonzero().unwrap();
        assert!((first as i64 - 160).abs() <= 1, "first tap {first}");
    }

    #[test]
    fn full_absorption_leaves_only_the_direct_path() {
        let mut cfg = room(0.05);
        cfg.dims = [3.0, 3.0, 2.5];
        cfg.listener_pos = [2.0, 2.0, 1.2];
        assert_eq!(sabine_absorption(&cfg), 1.0);
        let rir = generate_rir(&cfg).unwrap();
        let nonzero: Vec<usize> = (0..rir.taps.len()).filter(|&i| rir.taps[i] != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(rir.taps[nonzero[0]], 1.0);
    }

    #[test]
    fn length_covers_rt60() {
        for rt in [0.2, 0.5, 0.8] {
            let rir = generate_rir(&room(rt)).unwrap();
            assert!(rir.taps.len() as f64 >= rt * 16_000.0);
            let peak = rir.taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            assert!((peak - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate_rir(&room(0.6)).unwrap(), generate_rir(&room(0.6)).unwrap());
    }

    #[test]
    fn no_energy_before_direct_path() {
        let cfg = room(0.7);
        let rir = generate_rir(&cfg).unwrap();
        let direct = (cfg.distance() * 16_000.0 / SPEED_OF_SOUND).round() as usize;
        assert!(rir.taps[..direct].iter().all(|t| *t == 0.0));
    }
}
