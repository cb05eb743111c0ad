mod checkpoint;
mod ctc;
mod dataset;
mod model;
pub mod synth;
mod train;
mod vocab;

pub use checkpoint::{decode as decode_checkpoint, encode as encode_checkpoint, load as load_checkpoint, save as save_checkpoint};
pub use ctc::{collapse, ctc_loss, ctc_loss_grad, Logits};
pub use dataset::{load_dataset, parse_index, save_dataset, Utterance, TRANSCRIPTS_FILE};
pub use model::{input_gradient, Architecture, Matrix, Parameters, RnnLayer, Trace, VictimModel};
pub use train::{evaluate, fit, split, train, train_with_report, EpochStats, TrainConfig, TrainReport};
pub use vocab::{normalize_text, words, TranscriptionTarget, Vocabulary, BLANK};
