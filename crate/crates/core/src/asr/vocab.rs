use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered character set; index 0 is the CTC blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    chars: Vec<char>,
}

pub const BLANK: usize = 0;

impl Default for Vocabulary {
    fn default() -> Self {
        let mut chars = vec![' ', '\''];
        chars.extend('a'..='z');
        Self { chars }
    }
}

impl Vocabulary {
    pub fn new(chars: Vec<char>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if chars.is_empty() || !chars.iter().all(|c| seen.insert(*c)) {
            return Err(Error::Config("vocabulary must be nonempty and unique".into()));
        }
        Ok(Self { chars })
    }

    /// Number of output classes including the blank.
    pub fn size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn id(&self, c: char) -> Result<usize> {
        self.chars
            .iter()
            .position(|&x| x == c)
            .map(|i| i + 1)
            .ok_or(Error::UnknownCharacter(c))
    }

    pub fn char(&self, id: usize) -> Option<char> {
        id.checked_sub(1).and_then(|i| self.chars.get(i).copied())
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars().map(|c| self.id(c)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().filter_map(|&i| self.char(i)).collect()
    }
}

/// Lowercases and collapses runs of whitespace to single spaces.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// A transcript together with its token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptionTarget {
    pub text: String,
    pub token_ids: Vec<usize>,
}

impl TranscriptionTarget {
    pub fn new(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let text = normalize_text(text);
        let token_ids = vocab.encode(&text)?;
        Ok(Self { text, token_ids })
    }

    pub fn words(&self) -> Vec<String> {
        words(&self.text)
    }

    /// Frames needed by CTC: one per token plus one blank between repeats.
    pub fn min_frames(&self) -> usize {
        let repeats = self.token_ids.windows(2).filter(|w| w[0] == w[1]).count();
        self.token_ids.len() + repeats
    }
}
