use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{draw_offset, AttackConfig};
use crate::dsp::{AudioClip, Convolver};
use crate::error::Result;
use crate::rir::{RirPool, RoomConfig};

/// Shifts right by `k`, zero-filling the head and truncating the tail.
pub fn apply_offset(clip: &AudioClip, k: usize) -> AudioClip {
    AudioClip::new(shift_right(&clip.samples, k), clip.sample_rate)
}

fn shift_right(x: &[f64], k: usize) -> Vec<f64> {
    let k = k.min(x.len());
    let mut out = vec![0.0; x.len()];
    out[k..].copy_from_slice(&x[..x.len() - k]);
    out
}

fn shift_left(g: &[f64], k: usize) -> Vec<f64> {
    let k = k.min(g.len());
    let mut out = vec![0.0; g.len()];
    out[..g.len() - k].copy_from_slice(&g[k..]);
    out
}

/// What was drawn for one simulation copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub room: Option<RoomConfig>,
    pub pool_index: Option<usize>,
    pub offset: usize,
}

/// One random room simulation: noise, reverberation, zero prepend, offset.
#[derive(Debug, Clone)]
pub struct Transform {
    noise: Vec<f64>,
    conv: Convolver,
    prepend: usize,
    pub record: DrawRecord,
}

impl Transform {
    pub fn draw(len: usize, pool: &RirPool, cfg: &AttackConfig, rng: &mut impl Rng) -> Result<Self> {
        let d = pool.draw(rng)?;
        let conv = Convolver::new(&d.rir.taps, len)?;
        let offset = draw_offset(cfg.max_offset, rng);
        let noise = if cfg.noise_sigma > 0.0 {
            let n = Normal::new(0.0, cfg.noise_sigma).expect("finite sigma");
            (0..len).map(|_| n.sample(rng)).collect()
        } else {
            vec![0.0; len]
        };
        Ok(Self {
            noise,
            conv,
            prepend: cfg.max_offset,
            record: DrawRecord { room: d.room, pool_index: d.index, offset },
        })
    }

    /// Output length is input length plus the prepended zeros.
    pub fn apply(&self, adv: &[f64]) -> Vec<f64> {
        let noisy: Vec<f64> = adv.iter().zip(&self.noise).map(|(a, n)| a + n).collect();
        let wet = self.conv.apply(&noisy);
        let mut padded = vec![0.0; self.prepend];
        padded.extend(wet);
        shift_right(&padded, self.record.offset)
    }

    /// Adjoint of `apply` with respect to `adv` (noise is additive, so it drops out).
    pub fn adjoint(&self, grad: &[f64]) -> Vec<f64> {
        let unshifted = shift_left(grad, self.record.offset);
        self.conv.adjoint(&unshifted[self.prepend..])
    }
}

pub fn draw_transforms(len: usize, pool: &RirPool, cfg: &AttackConfig, rng: &mut impl Rng) -> Result<Vec<Transform>> {
    (0..cfg.eot_copies).map(|_| Transform::draw(len, pool, cfg, rng)).collect()
}

/// Draws `cfg.eot_copies` transformations and applies them to `adv`.
pub fn eot_transform(
    adv: &AudioClip,
    pool: &RirPool,
    cfg: &AttackConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<AudioClip>, Vec<DrawRecord>)> {
    let transforms = draw_transforms(adv.len(), pool, cfg, rng)?;
    let clips = transforms
        .iter()
        .map(|t| AudioClip::new(t.apply(&adv.samples), adv.sample_rate))
        .collect();
    Ok((clips, transforms.into_iter().map(|t| t.record).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn offset_examples() {
        let c = AudioClip::new(vec![1.0, 2.0, 3.0, 4.0], 16_000);
        assert_eq!(apply_offset(&c, 2).samples, vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(apply_offset(&c, 0), c);
        assert_eq!(apply_offset(&c, 4).samples, vec![0.0; 4]);
    }

    #[test]
    fn degenerate_copies_are_zero_prepended_input() {
        let cfg = AttackConfig { noise_sigma: 0.0, max_offset: 0, ..AttackConfig::default() };
        let adv = AudioClip::new((0..300).map(|i| (i as f64).sin()).collect(), 16_000);
        let (copies, _) = eot_transform(&adv, &RirPool::identity(16_000), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(copies.len(), 8);
        for c in copies {
            assert_eq!(c, adv);
        }
    }

    #[test]
    fn adjoint_matches_inner_product() {
        let cfg = AttackConfig { max_offset: 7, ..AttackConfig::default() };
        let pool = RirPool::dynamic(Default::default(), Default::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Transform::draw(500, &pool, &cfg, &mut rng).unwrap();
        let x: Vec<f64> = (0..500).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let g: Vec<f64> = (0..507).map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.2).collect();
        // apply is affine; its linear part is apply(x) - apply(0).
        let zero = t.apply(&vec![0.0; 500]);
        let ax: Vec<f64> = t.apply(&x).iter().zip(&zero).map(|(a, b)| a - b).collect();
        let lhs: f64 = ax.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(t.adjoint(&g)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }
}
