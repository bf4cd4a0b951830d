use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a weight vector is normalized in the sentence loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// 0/1 mask; the sentence loss is the mean over selected tokens.
    Binary,
    /// Real weights; the sentence loss is divided by the sentence length.
    Soft,
}

/// Per-target-token loss weights for one sentence at one training step.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    mode: WeightMode,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, mode: WeightMode) -> Result<Self> {
        for (position, &value) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::WeightOutOfRange { position, value });
            }
            if mode == WeightMode::Binary && value != 0.0 && value != 1.0 {
                return Err(Error::invalid(format!(
                    "binary weight vector holds {value} at position {position}"
                )));
            }
        }
        Ok(Self { weights, mode })
    }

    /// Uniform weights: the plain per-sentence cross-entropy.
    pub fn ones(len: usize) -> Self {
        Self {
            weights: vec![1.0; len],
            mode: WeightMode::Soft,
        }
    }

    /// Binary mask with ones at the given positions (0-based).
    pub fn from_positions(len: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        let mut weights = vec![0.0; len];
        for p in positions {
            weights[p] = 1.0;
        }
        Self {
            weights,
            mode: WeightMode::Binary,
        }
    }

    pub(crate) fn soft_unchecked(weights: Vec<f64>) -> Self {
        Self {
            weights,
            mode: WeightMode::Soft,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of nonzero weights.
    pub fn selected(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    /// Denominator of the sentence loss: `|S|` for binary masks, the sentence
    /// length for soft weights. Zero for an empty mask.
    pub fn normalizer(&self) -> f64 {
        match self.mode {
            WeightMode::Binary => self.selected() as f64,
            WeightMode::Soft => self.weights.len() as f64,
        }
    }

    /// Per-token coefficients `w_t / normalizer` (all zero for an empty mask).
    pub fn coefficients(&self) -> Vec<f64> {
        let norm = self.normalizer();
        if norm == 0.0 {
            return vec![0.0; self.weights.len()];
        }
        self.weights.iter().map(|w| w / norm).collect()
    }
}
