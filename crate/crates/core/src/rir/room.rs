use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum distance between any source/listener and a wall.
pub const WALL_CLEARANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    /// Room size in meters.
    pub dims: [f64; 3],
    pub source_pos: [f64; 3],
    pub listener_pos: [f64; 3],
    /// Reverberation time in seconds.
    pub rt60: f64,
}

impl RoomConfig {
    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn distance(&self) -> f64 {
        self.source_pos
            .iter()
            .zip(&self.listener_pos)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn inside(&self, p: &[f64; 3]) -> bool {
        p.iter()
            .zip(&self.dims)
            .all(|(c, d)| *c >= WALL_CLEARANCE && *c <= d - WALL_CLEARANCE)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims.iter().all(|d| d.is_finite() && *d > 2.0 * WALL_CLEARANCE) {
            return Err(Error::InvalidRoom(format!("dimensions {:?}", self.dims)));
        }
        if !(self.rt60.is_finite() && self.rt60 > 0.0) {
            return Err(Error::InvalidRoom(format!("rt60 {}", self.rt60)));
        }
        if !self.inside(&self.source_pos) || !self.inside(&self.listener_pos) {
            return Err(Error::InvalidRoom(
                "source or listener closer than 0.1 m to a wall".into(),
            ));
        }
        if self.distance() <= 0.0 {
            return Err(Error::InvalidRoom("source and listener coincide".into()));
        }
        Ok(())
    }
}

/// How source and listener positions are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// Both positions uniform over an absolute box; draws closer than
    /// `min_distance` to each other or too close to a wall are redrawn.
    Uniform {
        min: [f64; 3],
        max: [f64; 3],
        min_distance: f64,
    },
    Fixed {
        source: [f64; 3],
        listener: [f64; 3],
    },
}

/// Inclusive sampling ranges for every room parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRanges {
    pub dims_min: [f64; 3],
    pub dims_max: [f64; 3],
    pub rt60_min: f64,
    pub rt60_max: f64,
    pub placement: Placement,
}

impl Default for RoomRanges {
    fn default() -> Self {
        Self {
            dims_min: [3.0, 3.0, 2.5],
            dims_max: [8.0, 6.0, 3.5],
            rt60_min: 0.2,
            rt60_max: 0.8,
            placement: Placement::Uniform {
                min: [0.1, 0.1, 0.5],
                max: [7.9, 5.9, 2.0],
                min_distance: 0.5,
            },
        }
    }
}

pub const RT60_LIMITS: (f64, f64) = (0.2, 0.8);

/// How many rejected draws `sample_room` tolerates before giving up.
const MAX_TRIES: usize = 10_000;

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn uniform3(rng: &mut impl Rng, lo: &[f64; 3], hi: &[f64; 3]) -> [f64; 3] {
    let mut p = [0.0; 3];
    for (i, c) in p.iter_mut().enumerate() {
        *c = uniform(rng, lo[i], hi[i]);
    }
    p
}

impl RoomRanges {
    /// Ranges collapsed onto a single room.
    pub fn point(cfg: &RoomConfig) -> Self {
        Self {
            dims_min: cfg.dims,
            dims_max: cfg.dims,
            rt60_min: cfg.rt60,
            rt60_max: cfg.rt60,
            placement: Placement::Fixed {
                source: cfg.source_pos,
                listener: cfg.listener_pos,
            },
        }
    }

    pub fn with_rt60(mut self, lo: f64, hi: f64) -> Self {
        self.rt60_min = lo;
        self.rt60_max = hi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |lo: &[f64; 3], hi: &[f64; 3]| lo.iter().zip(hi).all(|(a, b)| a <= b);
        let placement_ok = match &self.placement {
            Placement::Uniform { min, max, .. } => ordered(min, max),
            Placement::Fixed { .. } => true,
        };
        if !ordered(&self.dims_min, &self.dims_max) || !placement_ok || self.rt60_min > self.rt60_max {
            return Err(Error::InvalidRoom("range bounds out of order".into()));
        }
        if !self.dims_min.iter().all(|d| *d > 2.0 * WALL_CLEARANCE) {
            return Err(Error::InvalidRoom("room dimensions too small".into()));
        }
        if self.rt60_min < RT60_LIMITS.0 - 1e-12 || self.rt60_max > RT60_LIMITS.1 + 1e-12 {
            return Err(Error::InvalidRoom(format!(
                "rt60 range [{}, {}] outside [0.2, 0.8]",
                self.rt60_min, self.rt60_max
            )));
        }
        Ok(())
    }
}

/// Draws a room uniformly from `ranges`, redrawing until both positions keep
/// the wall clearance and the minimum distance.
pub fn sample_room(ranges: &RoomRanges, rng: &mut impl Rng) -> Result<RoomConfig> {
    ranges.validate()?;
    for _ in 0..MAX_TRIES {
        let dims = uniform3(rng, &ranges.dims_min, &ranges.dims_max);
        let rt60 = uniform(rng, ranges.rt60_min, ranges.rt60_max);
        let (source_pos, listener_pos, min_distance) = match &ranges.placement {
            Placement::Fixed { source, listener } => (*source, *listener, 0.0),
            Placement::Uniform {
                min,
                max,
                min_distance,
            } => (uniform3(rng, min, max), uniform3(rng, min, max), *min_distance),
        };
        let cfg = RoomConfig {
            dims,
            source_pos,
            listener_pos,
            rt60,
        };
        if cfg.distance() >= min_distance && cfg.validate().is_ok() {
            return Ok(cfg);
        }
    }
    Err(Error::InvalidRoom(format!(
        "no valid placement found after {MAX_TRIES} draws"
    )))
}

/// Redraws only the positions of `room`, keeping dimensions and RT60.
pub(crate) fn resample_positions(
    room: &RoomConfig,
    ranges: &RoomRanges,
    rng: &mut impl Rng,
) -> Result<RoomConfig> {
    let fixed = RoomRanges {
        dims_min: room.dims,
        dims_max: room.dims,
        rt60_min: room.rt60,
        rt60_max: room.rt60,
        ..ranges.clone()
    };
    sample_room(&fixed, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn room() -> RoomConfig {
        RoomConfig {
            dims: [5.0, 4.0, 3.0],
            source_pos: [1.0, 1.0, 1.5],
            listener_pos: [3.0, 2.5, 1.2],
            rt60: 0.45,
        }
    }

    #[test]
    fn point_ranges_reproduce_the_room() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_room(&RoomRanges::point(&room()), &mut rng).unwrap(), room());
    }

    #[test]
    fn rt60_stays_in_range() {
        let ranges = RoomRanges::default().with_rt60(0.4, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let r = sample_room(&ranges, &mut rng).unwrap();
            assert!((0.4..=0.5).contains(&r.rt60));
            r.validate().unwrap();
            assert!(r.distance() >= 0.5);
        }
    }

    #[test]
    fn same_seed_same_rooms() {
        let ranges = RoomRanges::default();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            assert_eq!(
                sample_room(&ranges, &mut a).unwrap(),
                sample_room(&ranges, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn impossible_placement_is_an_error() {
        let ranges = RoomRanges {
            placement: Placement::Uniform {
                min: [10.0, 10.0, 10.0],
                max: [11.0, 11.0, 11.0],
                min_distance: 0.0,
            },
            ..RoomRanges::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(
            sample_room(&ranges, &mut rng),
            Err(Error::InvalidRoom(_))
        ));
    }

    #[test]
    fn rt60_outside_interval_is_rejected() {
        let ranges = RoomRanges::default().with_rt60(0.1, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(sample_room(&ranges, &mut rng).is_err());
    }

    #[test]
    fn wall_clearance_is_enforced() {
        let mut r = room();
        r.source_pos[0] = 0.05;
        assert!(r.validate().is_err());
    }
}
