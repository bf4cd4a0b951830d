use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ablation::{ablation_weight_vector, Ablation};
use super::sentence::ScMethod;
use super::token::{hard_weight_vector, soft_weight_vector};
use super::weights::WeightVector;
use crate::error::{Error, Result};

/// Which curriculum drives training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "tc-hard")]
    TcHard,
    #[serde(rename = "tc-soft")]
    TcSoft,
    #[serde(rename = "ablation-random")]
    AblationRandom,
    #[serde(rename = "ablation-lowloss")]
    AblationLowLoss,
    #[serde(rename = "ablation-range")]
    AblationRange,
    #[serde(rename = "sc-rsqrt")]
    ScRsqrt,
    #[serde(rename = "sc-unc")]
    ScUnc,
    #[serde(rename = "tc-soft+sc")]
    TcSoftSc,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::None,
        Variant::TcHard,
        Variant::TcSoft,
        Variant::AblationRandom,
        Variant::AblationLowLoss,
        Variant::AblationRange,
        Variant::ScRsqrt,
        Variant::ScUnc,
        Variant::TcSoftSc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::TcHard => "tc-hard",
            Variant::TcSoft => "tc-soft",
            Variant::AblationRandom => "ablation-random",
            Variant::AblationLowLoss => "ablation-lowloss",
            Variant::AblationRange => "ablation-range",
            Variant::ScRsqrt => "sc-rsqrt",
            Variant::ScUnc => "sc-unc",
            Variant::TcSoftSc => "tc-soft+sc",
        }
    }

    /// Whether the variant reweights tokens inside a sentence.
    pub fn is_token_wise(self) -> bool {
        !matches!(self, Variant::None | Variant::ScRsqrt | Variant::ScUnc)
    }

    /// Whether the variant uses binary masks (normalized by `|S|`).
    pub fn is_binary(self) -> bool {
        matches!(
            self,
            Variant::TcHard | Variant::AblationRandom | Variant::AblationLowLoss | Variant::AblationRange
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.as_str()).collect();
                Error::config("curriculum", format!("unknown variant `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Curriculum variant plus every schedule parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub variant: Variant,
    /// Initial fraction of each target kept by the hard schedule.
    pub lambda0: f64,
    /// Initial decay base of the soft schedule.
    pub gamma0: f64,
    /// Exponent at the last position of the soft schedule.
    pub alpha0: f64,
    /// Curriculum length `I` in optimizer updates.
    pub steps: usize,
    /// Initial relative window for `ablation-range`.
    pub range_lo: f64,
    pub range_hi: f64,
    /// Sentence-level method paired with the soft schedule in `tc-soft+sc`.
    pub sc_method: ScMethod,
    /// Initial competence of the square-root schedule.
    pub sc_c0: f64,
    /// Length `T` of the sentence-level schedule; defaults to `steps`.
    pub sc_steps: Option<usize>,
    pub sc_baby_steps: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            variant: Variant::None,
            lambda0: 0.1,
            gamma0: 0.7,
            alpha0: 25.0,
            steps: 8000,
            range_lo: 0.3,
            range_hi: 0.4,
            sc_method: ScMethod::Unc,
            sc_c0: 0.01,
            sc_steps: None,
            sc_baby_steps: 4,
        }
    }
}

impl CurriculumConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0 < 1.0) {
            return Err(Error::config("lambda0", format!("must lie in (0, 1), got {}", self.lambda0)));
        }
        // gamma0 = 1 is accepted: it turns the soft schedule into plain training
        if !(0.0..=1.0).contains(&self.gamma0) {
            return Err(Error::config("gamma0", format!("must lie in [0, 1], got {}", self.gamma0)));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::config("alpha0", format!("must be positive, got {}", self.alpha0)));
        }
        if self.steps == 0 {
            return Err(Error::config("curriculum_steps", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.range_lo) || !(0.0..=1.0).contains(&self.range_hi) || self.range_lo >= self.range_hi {
            return Err(Error::config(
                "range",
                format!("need 0 <= lo < hi <= 1, got [{}, {})", self.range_lo, self.range_hi),
            ));
        }
        if !(self.sc_c0 > 0.0 && self.sc_c0 <= 1.0) {
            return Err(Error::config("sc_c0", format!("must lie in (0, 1], got {}", self.sc_c0)));
        }
        if self.sc_steps == Some(0) {
            return Err(Error::config("sc_steps", "must be at least 1"));
        }
        if self.sc_baby_steps == 0 {
            return Err(Error::config("sc_baby_steps", "must be at least 1"));
        }
        Ok(())
    }

    /// Length of the sentence-level schedule.
    pub fn sentence_steps(&self) -> usize {
        self.sc_steps.unwrap_or(self.steps)
    }

    /// Sentence-level method in use, if any.
    pub fn sentence_method(&self) -> Option<ScMethod> {
        match self.variant {
            Variant::ScRsqrt => Some(ScMethod::Rsqrt),
            Variant::ScUnc => Some(ScMethod::Unc),
            Variant::TcSoftSc => Some(self.sc_method),
            _ => None,
        }
    }

    pub fn needs_token_losses(&self) -> bool {
        self.variant == Variant::AblationLowLoss
    }

    /// Weights for one target of length `len` at update `step`. `rng` feeds
    /// the random ablation, `losses` the low-loss ablation.
    pub fn token_weights<R: Rng>(&self, len: usize, step: usize, rng: Option<&mut R>, losses: Option<&[f64]>) -> Result<WeightVector> {
        let (total, lambda0) = (self.steps, self.lambda0);
        Ok(match self.variant {
            Variant::None | Variant::ScRsqrt | Variant::ScUnc => WeightVector::ones(len),
            Variant::TcHard => hard_weight_vector(len, step, total, lambda0),
            Variant::TcSoft | Variant::TcSoftSc => soft_weight_vector(len, step, total, self.gamma0, self.alpha0),
            Variant::AblationRandom => ablation_weight_vector(Ablation::Random(rng), len, step, total, lambda0)?,
            Variant::AblationLowLoss => ablation_weight_vector::<R>(Ablation::LowLoss(losses), len, step, total, lambda0)?,
            Variant::AblationRange => ablation_weight_vector::<R>(
                Ablation::Range {
                    lo: self.range_lo,
                    hi: self.range_hi,
                },
                len,
                step,
                total,
                lambda0,
            )?,
        })
    }
}
