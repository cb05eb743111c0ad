pub mod asr;
pub mod attack;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod psycho;
pub mod rir;

pub use error::{Error, Result};
