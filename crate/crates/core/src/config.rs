//! Flat `section.key = value` configuration text.
//!
//! Values are JSON when they parse as JSON and bare strings otherwise, so
//! `attack.learning_rate = 0.002`, `attack.variant = robust` and
//! `attack.room_ranges.dims_min = [3, 3, 2.5]` all work. Later lines win.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::asr::{synth::SynthConfig, TrainConfig};
use crate::attack::AttackConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, TARGETS};
use crate::rir::RoomRanges;

/// Name of the resolved configuration written beside every command's outputs.
pub const RESOLVED_CONFIG_FILE: &str = "run_config.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub target: String,
    pub attack: AttackConfig,
    pub eval: EvalConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub rooms: RoomRanges,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            model: None,
            dataset: None,
            target: TARGETS[0].to_owned(),
            attack: AttackConfig::default(),
            eval: EvalConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            rooms: RoomRanges::default(),
        }
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key '{key}'")));
    }
    for part in &parts[..parts.len() - 1] {
        let obj = match node {
            Value::Object(m) => m,
            _ => return Err(Error::Config(format!("'{key}': '{part}' is not a section"))),
        };
        let next = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if next.is_null() {
            *next = Value::Object(Map::new());
        }
        node = next;
    }
    match node {
        Value::Object(m) => {
            m.insert(parts[parts.len() - 1].to_owned(), value);
            Ok(())
        }
        _ => Err(Error::Config(format!("'{key}' does not name a setting"))),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) if !m.is_empty() => {
            for (k, child) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        _ => out.push((prefix.to_owned(), v.clone())),
    }
}

fn has_path(root: &Value, key: &str) -> bool {
    key.split('.').try_fold(root, |node, part| node.get(part)).is_some()
}

/// Splits config text into `(key, value)` pairs, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies `overrides` on top of `self`; unknown keys are rejected.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut root = serde_json::to_value(self)?;
        for (k, v) in overrides {
            set_path(&mut root, k, parse_value(v))?;
        }
        let cfg: RunConfig =
            serde_json::from_value(root).map_err(|e| Error::Config(format!("invalid setting: {e}")))?;
        let check = serde_json::to_value(&cfg)?;
        if let Some((k, _)) = overrides.iter().find(|(k, _)| !has_path(&check, k)) {
            return Err(Error::Config(format!("unknown setting '{k}'")));
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::default().with_overrides(&parse_pairs(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Every setting, one per line, in a stable order; parses back to `self`.
    pub fn to_text(&self) -> Result<String> {
        let mut pairs = Vec::new();
        flatten("", &serde_json::to_value(self)?, &mut pairs);
        let mut out = String::new();
        for (k, v) in pairs {
            let text = match &v {
                Value::String(s) if parse_value(s) == v && s.trim() == s && !s.is_empty() => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {text}\n"));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        self.train.validate()?;
        self.rooms.validate()?;
        self.eval.ranges.validate()?;
        if self.eval.n_transforms == 0 {
            return Err(Error::Config("eval.n_transforms must be at least 1".into()));
        }
        Ok(())
    }

    pub fn write_beside(&self, dir: impl AsRef<Path>) -> Result<()> {
        std::fs::create_dir_all(dir.as_ref())?;
        std::fs::write(dir.as_ref().join(RESOLVED_CONFIG_FILE), self.to_text()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{PoolSpec, Variant};
    use crate::rir::RoomMode;

    #[test]
    fn text_roundtrip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn sections_and_bare_strings() {
        let cfg = RunConfig::parse(
            "# comment\nattack.variant = combined\nattack.learning_rate = 0.004\ntarget = please open the door\n\
             attack.pool.kind = fixed\nattack.pool.size = 32\nattack.pool.room_mode = one_room\nattack.pool.seed = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.attack.variant, Variant::Combined);
        assert_eq!(cfg.attack.learning_rate, Some(0.004));
        assert_eq!(cfg.attack.pool, PoolSpec::Fixed { size: 32, room_mode: RoomMode::OneRoom, seed: 4 });
        assert_eq!(RunConfig::parse(&cfg.to_text().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn later_values_override() {
        let cfg = RunConfig::parse("seed = 1\nseed = 9").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        assert!(RunConfig::parse("attack.learnin_rate = 1").is_err());
        assert!(RunConfig::parse("attack.variant = sideways").is_err());
        assert!(RunConfig::parse("just text").is_err());
        assert!(RunConfig::parse("seed.x = 1").is_err());
        assert!(RunConfig::parse("a..b = 1").is_err());
    }
}
