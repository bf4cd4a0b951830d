use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::optim::AdamHyper;
use crate::curriculum::{CurriculumConfig, MetricDirection};
use crate::error::{Error, Result};

/// Metric computed on the dev set at each evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DevMetric {
    /// Greedy token accuracy in `[0, 1]`.
    #[default]
    Accuracy,
    /// Corpus BLEU of greedy outputs, 0 to 100.
    Bleu,
    Perplexity,
}

impl DevMetric {
    pub fn direction(self) -> MetricDirection {
        match self {
            DevMetric::Perplexity => MetricDirection::Lower,
            _ => MetricDirection::Higher,
        }
    }
}

/// Optimization settings. The curriculum, seed and output directory are
/// carried alongside but are not part of the serialized form; run
/// configurations supply them separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub warmup: usize,
    pub max_steps: usize,
    /// Target tokens per batch.
    pub batch_tokens: usize,
    /// Log (and evaluate on dev) every this many updates; 0 logs only the
    /// final update.
    pub eval_interval: usize,
    pub dev_metric: DevMetric,
    #[serde(skip)]
    pub seed: u64,
    pub weight_decay: f64,
    /// Rescale gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Save a checkpoint every this many updates (0: final one only).
    pub checkpoint_interval: usize,
    /// Where checkpoints and the training log go; nothing is written when
    /// unset.
    #[serde(skip)]
    pub checkpoint_dir: Option<PathBuf>,
    #[serde(skip)]
    pub curriculum: CurriculumConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamHyper::default();
        Self {
            peak_lr: 5e-4,
            warmup: 8000,
            max_steps: 20000,
            batch_tokens: 4096,
            eval_interval: 0,
            dev_metric: DevMetric::Accuracy,
            seed: 1,
            weight_decay: 0.0,
            clip_norm: None,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            checkpoint_interval: 0,
            checkpoint_dir: None,
            curriculum: CurriculumConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(Error::config("peak_lr", format!("must be positive, got {}", self.peak_lr)));
        }
        if self.warmup == 0 {
            return Err(Error::config("warmup", "must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        if self.batch_tokens == 0 {
            return Err(Error::config("batch_tokens", "must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::config("clip_norm", format!("must be positive, got {c}")));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta", "betas must lie in [0, 1)"));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::config("eps", "must be non-negative"));
        }
        self.curriculum.validate()
    }
}
