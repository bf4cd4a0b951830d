//! Sentence-level curricula: difficulty scores plus a schedule deciding how
//! much of the easy-to-hard ordering is available at each update.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ngram::NGramLm;
use crate::data::SamplePair;
use crate::error::{Error, Result};

/// Square-root competence `min(1, sqrt(step * (1 - c0^2) / total + c0^2))`.
pub fn competence(step: usize, total: usize, c0: f64) -> f64 {
    if step >= total {
        return 1.0;
    }
    let c2 = c0 * c0;
    (step as f64 * (1.0 - c2) / total as f64 + c2).sqrt().min(1.0)
}

/// Word-rarity difficulty: `-sum log(relative unigram frequency)` over each
/// source sentence, with frequencies counted on the source side of `pairs`.
pub fn rarity_difficulty(pairs: &[SamplePair]) -> Vec<f64> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    let mut total = 0usize;
    for p in pairs {
        for &w in &p.source {
            *counts.entry(w).or_default() += 1;
            total += 1;
        }
    }
    pairs
        .iter()
        .map(|p| {
            p.source
                .iter()
                .map(|w| -(counts[w] as f64 / total as f64).ln())
                .sum()
        })
        .collect()
}

/// Joint source+target per-token perplexity under 4-gram models trained on
/// each side of the corpus.
pub fn uncertainty_difficulty(pairs: &[SamplePair]) -> Vec<f64> {
    let src_lm = NGramLm::train(pairs.iter().map(|p| p.source.as_slice()), 4, 0.1);
    let tgt_lm = NGramLm::train(pairs.iter().map(|p| p.target_words()), 4, 0.1);
    pairs
        .iter()
        .map(|p| {
            let (ls, ns) = if p.source.is_empty() { (0.0, 0) } else { src_lm.log_prob(&p.source) };
            let (lt, nt) = tgt_lm.log_prob(p.target_words());
            (-(ls + lt) / (ns + nt) as f64).exp()
        })
        .collect()
}

/// Indices sorted from easiest to hardest (ties by index).
pub fn easy_to_hard(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order
}

/// Which sentence-level baseline drives the selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScMethod {
    /// Word rarity with square-root competence.
    Rsqrt,
    /// N-gram uncertainty with cumulative baby steps.
    Unc,
}

#[derive(Clone, Debug, PartialEq)]
enum Release {
    Competence { c0: f64, total: usize },
    /// Exclusive end (in `order`) of each cumulative bucket.
    BabySteps { ends: Vec<usize>, total: usize },
}

/// Easy-to-hard ordering plus the rule that releases it over updates.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceSchedule {
    order: Vec<usize>,
    release: Release,
}

impl SentenceSchedule {
    /// Square-root competence schedule over precomputed difficulty scores.
    pub fn rsqrt(scores: &[f64], total: usize, c0: f64) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("sentence curriculum over an empty corpus".into()));
        }
        if !(c0 > 0.0 && c0 <= 1.0) || total == 0 {
            return Err(Error::invalid(format!("competence needs 0 < c0 <= 1 and T >= 1 (c0 {c0}, T {total})")));
        }
        Ok(Self {
            order: easy_to_hard(scores),
            release: Release::Competence { c0, total },
        })
    }

    /// `steps` equal buckets of increasing difficulty; bucket `k` (0-based)
    /// unlocks at update `k * total / steps`.
    pub fn baby_steps(scores: &[f64], steps: usize, total: usize) -> Result<Self> {
        if steps == 0 || total == 0 {
            return Err(Error::invalid("baby steps need a positive bucket count and length"));
        }
        if scores.len() < steps {
            return Err(Error::invalid(format!(
                "corpus of {} sentences is smaller than {steps} buckets",
                scores.len()
            )));
        }
        let n = scores.len();
        let ends = (1..=steps).map(|k| k * n / steps).collect();
        Ok(Self {
            order: easy_to_hard(scores),
            release: Release::BabySteps { ends, total },
        })
    }

    pub fn corpus_size(&self) -> usize {
        self.order.len()
    }

    /// Sentence indices from easiest to hardest.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of sentences (a prefix of [`Self::order`]) available at `step`.
    pub fn available(&self, step: usize) -> usize {
        let n = self.order.len();
        match &self.release {
            Release::Competence { c0, total } => {
                let c = competence(step, *total, *c0);
                // sentences whose percentile rank (r + 1) / n is within c
                ((c * n as f64 + 1e-9).floor() as usize).clamp(1, n)
            }
            Release::BabySteps { ends, total } => {
                let steps = ends.len();
                let unlocked = (0..steps).filter(|&k| step * steps >= k * total).count();
                ends[unlocked - 1]
            }
        }
    }

    pub fn selected(&self, step: usize) -> &[usize] {
        &self.order[..self.available(step)]
    }

    /// Number of buckets unlocked at `step` (baby steps only).
    pub fn buckets(&self) -> Option<Vec<&[usize]>> {
        match &self.release {
            Release::BabySteps { ends, .. } => {
                let mut start = 0;
                Some(
                    ends.iter()
                        .map(|&end| {
                            let b = &self.order[start..end];
                            start = end;
                            b
                        })
                        .collect(),
                )
            }
            Release::Competence { .. } => None,
        }
    }

    pub fn is_saturated(&self, step: usize) -> bool {
        self.available(step) == self.order.len()
    }
}

/// Sentences selected at `step` by the square-root schedule.
pub fn sc_rsqrt_schedule(step: usize, total: usize, c0: f64, scores: &[f64]) -> Result<Vec<usize>> {
    Ok(SentenceSchedule::rsqrt(scores, total, c0)?.selected(step).to_vec())
}

/// Uncertainty-ordered baby-step schedule for a corpus.
pub fn sc_uncertainty_baby_steps(pairs: &[SamplePair], steps: usize, total: usize) -> Result<SentenceSchedule> {
    if pairs.len() < steps {
        return Err(Error::invalid(format!(
            "corpus of {} sentences is smaller than {steps} buckets",
            pairs.len()
        )));
    }
    SentenceSchedule::baby_steps(&uncertainty_difficulty(pairs), steps, total)
}
