use std::path::PathBuf;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psycho::PsychoConfig;
use crate::rir::{RirPool, RirSettings, RoomMode, RoomRanges};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Base,
    Robust,
    Psychoacoustic,
    Combined,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Base, Variant::Robust, Variant::Psychoacoustic, Variant::Combined];

    /// Whether the model loss is averaged over room-simulation copies.
    pub fn uses_eot(self) -> bool {
        matches!(self, Variant::Robust | Variant::Combined)
    }

    /// Whether the regularizer is the perceptual loss instead of the L2 norm.
    pub fn uses_psycho(self) -> bool {
        matches!(self, Variant::Psychoacoustic | Variant::Combined)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Robust => "robust",
            Variant::Psychoacoustic => "psychoacoustic",
            Variant::Combined => "combined",
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        if self.uses_psycho() {
            0.001
        } else {
            0.002
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the room impulse responses for the simulation copies come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolSpec {
    /// Unit impulse only.
    Identity,
    /// A fresh room per draw.
    Dynamic,
    /// A pool generated once from `seed`.
    Fixed { size: usize, room_mode: RoomMode, seed: u64 },
    /// RIRs previously written by `RirPool::save_dir`.
    Directory { path: PathBuf },
}

impl PoolSpec {
    pub fn build(&self, ranges: &RoomRanges, settings: RirSettings) -> Result<RirPool> {
        match self {
            PoolSpec::Identity => Ok(RirPool::identity(settings.sample_rate)),
            PoolSpec::Dynamic => RirPool::dynamic(ranges.clone(), settings),
            PoolSpec::Fixed { size, room_mode, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                RirPool::fixed(ranges.clone(), settings, *size, *room_mode, &mut rng)
            }
            PoolSpec::Directory { path } => RirPool::load_dir(path),
        }
    }

    /// Short label used in tables.
    pub fn label(&self) -> String {
        match self {
            PoolSpec::Identity => "identity".into(),
            PoolSpec::Dynamic => "dynamic".into(),
            PoolSpec::Fixed { size, room_mode, .. } => match room_mode {
                RoomMode::OneRoom => format!("{size}_one_room"),
                RoomMode::VariousRooms => format!("{size}_various"),
            },
            PoolSpec::Directory { path } => path.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub variant: Variant,
    /// Amplitude bound on the perturbation; derived from `snr_floor_db` when unset.
    pub epsilon: Option<f64>,
    pub snr_floor_db: f64,
    /// Defaults to 0.002 for L2 variants and 0.001 for perceptual variants.
    pub learning_rate: Option<f64>,
    pub min_iterations: usize,
    /// Keep going past `min_iterations` until the first success, up to this many.
    pub max_iterations: Option<usize>,
    pub alpha_init: f64,
    pub alpha_factor: f64,
    pub inc_streak: u32,
    pub dec_streak: u32,
    pub eot_copies: usize,
    /// Copies that must decode to the target; majority when unset.
    pub success_quorum: Option<usize>,
    pub noise_sigma: f64,
    pub max_offset: usize,
    pub ref_length: usize,
    pub pool: PoolSpec,
    pub room_ranges: RoomRanges,
    pub rir_settings: RirSettings,
    pub psycho: PsychoConfig,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Base,
            epsilon: None,
            snr_floor_db: 10.0,
            learning_rate: None,
            min_iterations: 5000,
            max_iterations: None,
            alpha_init: 0.3,
            alpha_factor: 1.1,
            inc_streak: 15,
            dec_streak: 100,
            eot_copies: 8,
            success_quorum: None,
            noise_sigma: 0.001,
            max_offset: 160,
            ref_length: 16_000,
            pool: PoolSpec::Dynamic,
            room_ranges: RoomRanges::default(),
            rir_settings: RirSettings::default(),
            psycho: PsychoConfig::default(),
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad("epsilon must be positive");
            }
        }
        if !self.snr_floor_db.is_finite() {
            return bad("snr_floor_db must be finite");
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("learning_rate must be positive");
            }
        }
        if self.min_iterations == 0 {
            return bad("min_iterations must be at least 1");
        }
        if self.max_iterations.is_some_and(|m| m < self.min_iterations) {
            return bad("max_iterations must be >= min_iterations");
        }
        if !(self.alpha_init >= 0.0 && self.alpha_init.is_finite()) {
            return bad("alpha_init must be nonnegative");
        }
        if !(self.alpha_factor > 1.0 && self.alpha_factor.is_finite()) {
            return bad("alpha_factor must be > 1");
        }
        if self.inc_streak == 0 || self.inc_streak >= self.dec_streak {
            return bad("streaks must satisfy 0 < inc_streak < dec_streak");
        }
        if self.eot_copies == 0 {
            return bad("eot_copies must be at least 1");
        }
        if self.success_quorum.is_some_and(|q| q == 0 || q > self.eot_copies) {
            return bad("success_quorum must be in 1..=eot_copies");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be nonnegative");
        }
        if self.ref_length == 0 {
            return bad("ref_length must be positive");
        }
        self.room_ranges.validate()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or_else(|| self.variant.default_learning_rate())
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations.unwrap_or(self.min_iterations)
    }

    pub fn quorum(&self) -> usize {
        self.success_quorum.unwrap_or(self.eot_copies / 2 + 1)
    }

    /// Explicit epsilon, or `max|x| * 10^(-snr_floor_db / 20)`.
    pub fn epsilon_for(&self, x: &[f64]) -> f64 {
        self.epsilon.unwrap_or_else(|| {
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            peak * 10f64.powf(-self.snr_floor_db / 20.0)
        })
    }
}

/// Random-offset range check shared by the transformation code.
pub(crate) fn draw_offset(max_offset: usize, rng: &mut impl Rng) -> usize {
    rng.gen_range(0..=max_offset)
}
