//! `key = value` run configuration with `#` comments.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::data::ScoreScale;
use crate::error::{AesaError, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Environment variable that overrides the configured seed (a command-line
/// `--seed` still wins).
pub const SEED_ENV: &str = "AESA_SEED";

pub const KEYS: [&str; 21] = [
    "learning_rate",
    "max_epochs",
    "patience",
    "alpha",
    "margin",
    "epsilon",
    "buffer_capacity",
    "seed",
    "adapter_dim",
    "lstm_hidden",
    "shared_dim",
    "attention_heads",
    "dropout",
    "score_lower",
    "score_upper",
    "val_count",
    "manifest",
    "features_dir",
    "checkpoint_out",
    "history_out",
    "metadata_out",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub adapter_dim: usize,
    pub lstm_hidden: usize,
    pub shared_dim: usize,
    pub attention_heads: usize,
    pub dropout: f64,
    pub scale: ScoreScale,
    /// Validation clips carved out of the training split when the manifest
    /// tags none as `val`.
    pub val_count: usize,
    pub manifest: Option<PathBuf>,
    pub features_dir: Option<PathBuf>,
    pub checkpoint_out: Option<PathBuf>,
    pub history_out: Option<PathBuf>,
    pub metadata_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            adapter_dim: ModelConfig::DEFAULT_ADAPTER_DIM,
            lstm_hidden: ModelConfig::DEFAULT_LSTM_HIDDEN,
            shared_dim: ModelConfig::DEFAULT_SHARED_DIM,
            attention_heads: ModelConfig::DEFAULT_ATTENTION_HEADS,
            dropout: ModelConfig::DEFAULT_DROPOUT,
            scale: ScoreScale::default(),
            val_count: 250,
            manifest: None,
            features_dir: None,
            checkpoint_out: None,
            history_out: None,
            metadata_out: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AesaError::Config(format!("line {line}: invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        let (mut lower, mut upper) = (cfg.scale.lower, cfg.scale.upper);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| AesaError::Config(format!("line {line}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(AesaError::Config(format!(
                    "line {line}: unknown key `{key}`"
                )));
            }
            if seen.contains(&key.to_string()) {
                return Err(AesaError::Config(format!(
                    "line {line}: duplicate key `{key}`"
                )));
            }
            seen.push(key.to_string());
            let t = &mut cfg.train;
            match key {
                "learning_rate" => t.learning_rate = parse_value(line, key, value)?,
                "max_epochs" => t.max_epochs = parse_value(line, key, value)?,
                "patience" => t.patience = parse_value(line, key, value)?,
                "alpha" => t.alpha = parse_value(line, key, value)?,
                "margin" => t.margin = parse_value(line, key, value)?,
                "epsilon" => t.epsilon = parse_value(line, key, value)?,
                "buffer_capacity" => t.buffer_capacity = parse_value(line, key, value)?,
                "seed" => t.seed = parse_value(line, key, value)?,
                "adapter_dim" => cfg.adapter_dim = parse_value(line, key, value)?,
                "lstm_hidden" => cfg.lstm_hidden = parse_value(line, key, value)?,
                "shared_dim" => cfg.shared_dim = parse_value(line, key, value)?,
                "attention_heads" => cfg.attention_heads = parse_value(line, key, value)?,
                "dropout" => cfg.dropout = parse_value(line, key, value)?,
                "score_lower" => lower = parse_value(line, key, value)?,
                "score_upper" => upper = parse_value(line, key, value)?,
                "val_count" => cfg.val_count = parse_value(line, key, value)?,
                "manifest" => cfg.manifest = Some(value.into()),
                "features_dir" => cfg.features_dir = Some(value.into()),
                "checkpoint_out" => cfg.checkpoint_out = Some(value.into()),
                "history_out" => cfg.history_out = Some(value.into()),
                "metadata_out" => cfg.metadata_out = Some(value.into()),
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.scale = ScoreScale::new(lower, upper)?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AesaError::io(path, e))?;
        Self::parse(&text)
    }

    /// Apply seed overrides: `flag` beats the environment, which beats the file.
    pub fn apply_seed_override(&mut self, flag: Option<u64>) -> Result<()> {
        if let Some(seed) = flag {
            self.train.seed = seed;
        } else if let Ok(value) = std::env::var(SEED_ENV) {
            self.train.seed = value.trim().parse().map_err(|_| {
                AesaError::Config(format!("{SEED_ENV}=`{value}` is not an integer"))
            })?;
        }
        Ok(())
    }

    pub fn model_config(&self, input_dim: usize, layer_count: usize) -> Result<ModelConfig> {
        let config = ModelConfig {
            input_dim,
            layer_count,
            adapter_dim: self.adapter_dim,
            lstm_hidden: self.lstm_hidden,
            shared_dim: self.shared_dim,
            attention_heads: self.attention_heads,
            dropout: self.dropout,
        };
        config.validate()?;
        Ok(config)
    }

    /// Every applied value, defaults included, in `key = value` form.
    pub fn to_metadata(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or(String::new(), |p| p.display().to_string())
        };
        let t = &self.train;
        let mut out = String::new();
        let pairs: [(&str, String); 21] = [
            ("learning_rate", t.learning_rate.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("alpha", t.alpha.to_string()),
            ("margin", t.margin.to_string()),
            ("epsilon", t.epsilon.to_string()),
            ("buffer_capacity", t.buffer_capacity.to_string()),
            ("seed", t.seed.to_string()),
            ("adapter_dim", self.adapter_dim.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("shared_dim", self.shared_dim.to_string()),
            ("attention_heads", self.attention_heads.to_string()),
            ("dropout", self.dropout.to_string()),
            ("score_lower", self.scale.lower.to_string()),
            ("score_upper", self.scale.upper.to_string()),
            ("val_count", self.val_count.to_string()),
            ("manifest", path(&self.manifest)),
            ("features_dir", path(&self.features_dir)),
            ("checkpoint_out", path(&self.checkpoint_out)),
            ("history_out", path(&self.history_out)),
            ("metadata_out", path(&self.metadata_out)),
        ];
        for (k, v) in pairs {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_defaults() {
        let cfg = RunConfig::parse(
            "# tiny run\nlearning_rate = 0.001  # faster\nalpha=0\n\nshared_dim = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.train.learning_rate, 0.001);
        assert_eq!(cfg.train.alpha, 0.0);
        assert_eq!(cfg.shared_dim, 8);
        assert_eq!(cfg.train.max_epochs, 100);
        assert_eq!(cfg.train.patience, 10);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        assert!(RunConfig::parse("learning_rat = 1").is_err());
        assert!(RunConfig::parse("alpha = 1\nalpha = 2").is_err());
        assert!(RunConfig::parse("alpha").is_err());
        assert!(RunConfig::parse("max_epochs = many").is_err());
    }

    #[test]
    fn metadata_echoes_every_key_and_reparses() {
        let cfg = RunConfig::parse("epsilon = 0.2\nmanifest = m.csv").unwrap();
        let meta = cfg.to_metadata();
        for key in KEYS {
            assert!(meta.contains(&format!("{key} = ")), "{key} missing");
        }
        let stripped: String = meta
            .lines()
            .filter(|l| !l.trim_end().ends_with('='))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(RunConfig::parse(&stripped).unwrap(), cfg);
    }

    #[test]
    fn seed_flag_wins() {
        let mut cfg = RunConfig::parse("seed = 5").unwrap();
        cfg.apply_seed_override(Some(9)).unwrap();
        assert_eq!(cfg.train.seed, 9);
    }
}
