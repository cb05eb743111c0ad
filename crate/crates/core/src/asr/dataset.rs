use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vocab::normalize_text;
use crate::dsp::{wav, AudioClip};
use crate::error::{Error, Result};

/// Index file inside a dataset directory: `<wav file>\t<transcript>` per line.
pub const TRANSCRIPTS_FILE: &str = "transcripts.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub text: String,
    pub clip: AudioClip,
}

/// Parses a transcripts index into `(file, normalized text)` entries.
pub fn parse_index(index: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in index.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (file, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::Dataset(format!("line {}: expected <file>\\t<text>", n + 1)))?;
        let text = normalize_text(text);
        if text.is_empty() {
            return Err(Error::Dataset(format!("line {}: empty transcript", n + 1)));
        }
        out.push((file.to_owned(), text));
    }
    Ok(out)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<Utterance>> {
    let dir = dir.as_ref();
    let index = std::fs::read_to_string(dir.join(TRANSCRIPTS_FILE))?;
    let mut out = Vec::new();
    for (file, text) in parse_index(&index)? {
        let clip = wav::read(dir.join(&file))?;
        let id = Path::new(&file).file_stem().map_or_else(|| file.clone(), |s| s.to_string_lossy().into_owned());
        out.push(Utterance { id, text, clip });
    }
    if out.is_empty() {
        return Err(Error::Dataset(format!("{} lists no utterances", dir.join(TRANSCRIPTS_FILE).display())));
    }
    Ok(out)
}

pub fn save_dataset(dir: impl AsRef<Path>, data: &[Utterance]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut index = String::new();
    for u in data {
        let file = format!("{}.wav", u.id);
        wav::write(dir.join(&file), &u.clip)?;
        index.push_str(&format!("{file}\t{}\n", u.text));
    }
    std::fs::write(dir.join(TRANSCRIPTS_FILE), index)?;
    Ok(())
}
