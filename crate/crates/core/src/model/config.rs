use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the model reads a source sentence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    #[default]
    EncoderDecoder,
    /// Language model: no encoder and no attention.
    DecoderOnly,
}

/// Sizes and regularization of the recurrent encoder-decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub source_vocab: usize,
    pub target_vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub mode: ModelMode,
    pub label_smoothing: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Longest decoder prefix (and decode length) accepted.
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            source_vocab: 0,
            target_vocab: 0,
            embed: 64,
            hidden: 64,
            layers: 2,
            mode: ModelMode::EncoderDecoder,
            label_smoothing: 0.1,
            dropout: 0.0,
            seed: 1,
            max_len: 128,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_vocab == 0 {
            return Err(Error::config("target_vocab", "must be positive"));
        }
        if self.mode == ModelMode::EncoderDecoder && self.source_vocab == 0 {
            return Err(Error::config("source_vocab", "must be positive for an encoder-decoder"));
        }
        for (field, v) in [("embed", self.embed), ("hidden", self.hidden), ("layers", self.layers), ("max_len", self.max_len)] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::config("label_smoothing", format!("must lie in [0, 1), got {}", self.label_smoothing)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout", format!("must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    pub fn has_encoder(&self) -> bool {
        self.mode == ModelMode::EncoderDecoder
    }
}
