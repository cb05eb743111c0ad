use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {len} samples, need at least {needed}")]
    InputTooShort { len: usize, needed: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("infinite SNR: noise signal is identically zero")]
    InfiniteSnr,

    #[error("insufficient decay range: {0}")]
    InsufficientDecay(String),

    #[error("invalid room: {0}")]
    InvalidRoom(String),

    #[error("empty RIR pool")]
    EmptyPool,

    #[error("target of {tokens} tokens ({required} frames with repeats) does not fit in {frames} frames")]
    InfeasibleTarget {
        tokens: usize,
        required: usize,
        frames: usize,
    },

    #[error("character {0:?} is not in the vocabulary")]
    UnknownCharacter(char),

    #[error("training did not converge: held-out WER {wer:.2}% after {epochs} epochs")]
    NotConverged { wer: f64, epochs: usize },

    #[error("empty reference transcript")]
    EmptyReference,

    #[error("no records found in {0}")]
    NoRecords(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
