use std::borrow::Cow;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::room::resample_positions;
use super::{generate_rir_with, sample_room, Rir, RirSettings, RoomConfig, RoomRanges};
use crate::dsp::{wav, AudioClip};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Every draw simulates a freshly sampled room.
    Dynamic,
    /// Draws pick uniformly from a pool generated up front.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomMode {
    /// All members share dimensions and RT60; only positions differ.
    OneRoom,
    VariousRooms,
}

#[derive(Debug, Clone)]
pub struct RirPool {
    pub mode: PoolMode,
    pub room_mode: RoomMode,
    pub ranges: RoomRanges,
    pub settings: RirSettings,
    rirs: Vec<Rir>,
    rooms: Vec<Option<RoomConfig>>,
}

/// One RIR handed out by [`RirPool::draw`].
#[derive(Debug, Clone)]
pub struct Draw<'a> {
    pub rir: Cow<'a, Rir>,
    pub room: Option<RoomConfig>,
    /// Member index for fixed pools.
    pub index: Option<usize>,
}

impl RirPool {
    pub fn dynamic(ranges: RoomRanges, settings: RirSettings) -> Result<Self> {
        ranges.validate()?;
        Ok(Self {
            mode: PoolMode::Dynamic,
            room_mode: RoomMode::VariousRooms,
            ranges,
            settings,
            rirs: Vec::new(),
            rooms: Vec::new(),
        })
    }

    /// Generates `size` RIRs up front.
    pub fn fixed(
        ranges: RoomRanges,
        settings: RirSettings,
        size: usize,
        room_mode: RoomMode,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut rooms = Vec::with_capacity(size);
        match room_mode {
            RoomMode::VariousRooms => {
                for _ in 0..size {
                    rooms.push(sample_room(&ranges, rng)?);
                }
            }
            RoomMode::OneRoom => {
                let base = sample_room(&ranges, rng)?;
                for _ in 0..size {
                    rooms.push(resample_positions(&base, &ranges, rng)?);
                }
            }
        }
        let rirs = rooms
            .iter()
            .map(|r| generate_rir_with(r, &settings))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: PoolMode::Fixed,
            room_mode,
            ranges,
            settings,
            rirs,
            rooms: rooms.into_iter().map(Some).collect(),
        })
    }

    /// Fixed pool with explicit members, e.g. measured or synthetic kernels.
    pub fn from_rirs(rirs: Vec<Rir>) -> Self {
        let sample_rate = rirs.first().map_or(16_000, |r| r.sample_rate);
        Self {
            mode: PoolMode::Fixed,
            room_mode: RoomMode::VariousRooms,
            ranges: RoomRanges::default(),
            settings: RirSettings {
                sample_rate,
                ..RirSettings::default()
            },
            rooms: vec![None; rirs.len()],
            rirs,
        }
    }

    /// Single unit impulse; makes the room transformation a no-op.
    pub fn identity(sample_rate: u32) -> Self {
        Self::from_rirs(vec![Rir::identity(sample_rate)])
    }

    pub fn len(&self) -> Option<usize> {
        match self.mode {
            PoolMode::Dynamic => None,
            PoolMode::Fixed => Some(self.rirs.len()),
        }
    }

    pub fn members(&self) -> impl Iterator<Item = (&Rir, Option<&RoomConfig>)> {
        self.rirs.iter().zip(self.rooms.iter().map(Option::as_ref))
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Result<Draw<'_>> {
        match self.mode {
            PoolMode::Dynamic => {
                let room = sample_room(&self.ranges, rng)?;
                let rir = generate_rir_with(&room, &self.settings)?;
                Ok(Draw {
                    rir: Cow::Owned(rir),
                    room: Some(room),
                    index: None,
                })
            }
            PoolMode::Fixed => {
                if self.rirs.is_empty() {
                    return Err(Error::EmptyPool);
                }
                let i = rng.gen_range(0..self.rirs.len());
                Ok(Draw {
                    rir: Cow::Borrowed(&self.rirs[i]),
                    room: self.rooms[i].clone(),
                    index: Some(i),
                })
            }
        }
    }

    /// Writes `rir_NNNN.wav` plus a `rir_NNNN.json` room sidecar per member.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, (rir, room)) in self.members().enumerate() {
            write_rir(&dir.join(format!("rir_{i:04}")), rir, room)?;
        }
        Ok(())
    }

    /// Loads a pool directory written by [`RirPool::save_dir`].
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut names: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "wav"))
            .collect();
        names.sort();
        let mut rirs = Vec::with_capacity(names.len());
        let mut rooms = Vec::with_capacity(names.len());
        for wav_path in names {
            let clip = wav::read(&wav_path)?;
            let json = wav_path.with_extension("json");
            rooms.push(if json.exists() {
                Some(parse_room_json(&std::fs::read(json)?)?)
            } else {
                None
            });
            rirs.push(Rir {
                taps: clip.samples,
                sample_rate: clip.sample_rate,
            });
        }
        if rirs.is_empty() {
            return Err(Error::EmptyPool);
        }
        let mut pool = Self::from_rirs(rirs);
        pool.rooms = rooms;
        Ok(pool)
    }
}

/// Writes `<stem>.wav` and, when known, `<stem>.json` with the room.
pub fn write_rir(stem: &Path, rir: &Rir, room: Option<&RoomConfig>) -> Result<()> {
    wav::write(
        stem.with_extension("wav"),
        &AudioClip::new(rir.taps.clone(), rir.sample_rate),
    )?;
    if let Some(room) = room {
        std::fs::write(stem.with_extension("json"), serde_json::to_vec_pretty(room)?)?;
    }
    Ok(())
}

/// Parses and validates a room sidecar.
pub fn parse_room_json(bytes: &[u8]) -> Result<RoomConfig> {
    let room: RoomConfig = serde_json::from_slice(bytes)?;
    room.validate()?;
    Ok(room)
}
