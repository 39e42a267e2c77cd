use serde::{Deserialize, Serialize};

use crate::error::{AesaError, Result};

/// Network dimensions. `input_dim` and `layer_count` come from the feature files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub layer_count: usize,
    pub adapter_dim: usize,
    /// Hidden size of each LSTM direction.
    pub lstm_hidden: usize,
    pub shared_dim: usize,
    pub attention_heads: usize,
    pub dropout: f64,
}

impl ModelConfig {
    pub const DEFAULT_ADAPTER_DIM: usize = 256;
    pub const DEFAULT_LSTM_HIDDEN: usize = 128;
    pub const DEFAULT_SHARED_DIM: usize = 128;
    pub const DEFAULT_ATTENTION_HEADS: usize = 4;
    pub const DEFAULT_DROPOUT: f64 = 0.3;

    pub fn new(input_dim: usize, layer_count: usize) -> Self {
        Self {
            input_dim,
            layer_count,
            adapter_dim: Self::DEFAULT_ADAPTER_DIM,
            lstm_hidden: Self::DEFAULT_LSTM_HIDDEN,
            shared_dim: Self::DEFAULT_SHARED_DIM,
            attention_heads: Self::DEFAULT_ATTENTION_HEADS,
            dropout: Self::DEFAULT_DROPOUT,
        }
    }

    /// The small configuration used for gradient checks and quick experiments:
    /// D=8, adapter 4, LSTM hidden 4, shared 8, 2 attention heads.
    pub fn tiny(layer_count: usize) -> Self {
        Self {
            input_dim: 8,
            layer_count,
            adapter_dim: 4,
            lstm_hidden: 4,
            shared_dim: 8,
            attention_heads: 2,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("layer_count", self.layer_count),
            ("adapter_dim", self.adapter_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("shared_dim", self.shared_dim),
            ("attention_heads", self.attention_heads),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(AesaError::Config(format!("{name} must be positive")));
        }
        if !self.shared_dim.is_multiple_of(self.attention_heads) {
            return Err(AesaError::Config(format!(
                "shared_dim {} is not divisible by attention_heads {}",
                self.shared_dim, self.attention_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(AesaError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.shared_dim / self.attention_heads
    }
}
