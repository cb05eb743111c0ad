//! Room sampling and impulse response simulation.
//!
//! Rooms are shoeboxes with uniform wall absorption derived from the
//! requested reverberation time. The early part of the response is an exact
//! image-source expansion; the late part is a seeded diffuse tail decaying at
//! the requested RT60. Everything is a deterministic function of the
//! [`RoomConfig`].

mod image;
mod pool;
mod room;
mod rt60;

use serde::{Deserialize, Serialize};

pub use image::{generate_rir, generate_rir_with, RirSettings};
pub use pool::{parse_room_json, write_rir, Draw, PoolMode, RirPool, RoomMode};
pub use room::{sample_room, Placement, RoomConfig, RoomRanges};
pub use rt60::{measure_rt60, schroeder_curve};

pub const SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
}

impl Rir {
    /// Unit impulse; convolution with it is the identity.
    pub fn identity(sample_rate: u32) -> Self {
        Self {
            taps: vec![1.0],
            sample_rate,
        }
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        self.taps.iter().position(|t| *t != 0.0)
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}
