//! Alternative token selectors with the same token budget as the hard
//! curriculum: random subsets, the lowest-loss window, and windows that
//! start at a shifted relative position.

use rand::seq::index::sample;
use rand::Rng;

use super::token::hard_subseq_length;
use super::weights::WeightVector;
use crate::error::{Error, Result};

/// Ablation strategy together with the auxiliary input it needs.
pub enum Ablation<'a, R: Rng> {
    /// Uniformly random positions, not necessarily contiguous.
    Random(Option<&'a mut R>),
    /// Contiguous window with the lowest mean teacher-forcing loss.
    LowLoss(Option<&'a [f64]>),
    /// Window initially covering `[lo, hi)` of the sentence (relative).
    Range { lo: f64, hi: f64 },
}

/// Binary weights holding exactly `hard_subseq_length(len, step, total, lambda0)` ones.
pub fn ablation_weight_vector<R: Rng>(
    strategy: Ablation<'_, R>,
    len: usize,
    step: usize,
    total: usize,
    lambda0: f64,
) -> Result<WeightVector> {
    let count = hard_subseq_length(len, step, total, lambda0);
    match strategy {
        Ablation::Random(rng) => {
            let rng = rng.ok_or_else(|| Error::invalid("random ablation needs an RNG stream"))?;
            let picked = sample(rng, len, count);
            Ok(WeightVector::from_positions(len, picked.into_iter()))
        }
        Ablation::LowLoss(losses) => {
            let losses = losses.ok_or_else(|| Error::invalid("low-loss ablation needs token losses"))?;
            if losses.len() != len {
                return Err(Error::LengthMismatch {
                    weights: losses.len(),
                    target: len,
                });
            }
            let start = lowest_loss_window(losses, count);
            Ok(WeightVector::from_positions(len, start..start + count))
        }
        Ablation::Range { lo, hi } => {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(Error::invalid(format!("bad relative range [{lo}, {hi})")));
            }
            let start = range_window_start(len, count, lo, hi);
            Ok(WeightVector::from_positions(len, start..start + count))
        }
    }
}

/// Start of the length-`width` window with minimum loss sum (leftmost on ties).
fn lowest_loss_window(losses: &[f64], width: usize) -> usize {
    let mut sum: f64 = losses[..width].iter().sum();
    let (mut best, mut best_sum) = (0, sum);
    for start in 1..=losses.len() - width {
        sum += losses[start + width - 1] - losses[start - 1];
        if sum < best_sum {
            best = start;
            best_sum = sum;
        }
    }
    best
}

/// The window grows symmetrically around the centre of the initial range
/// and spills over to the other side when it hits a sentence boundary.
fn range_window_start(len: usize, width: usize, lo: f64, hi: f64) -> usize {
    let centre = 0.5 * (lo + hi) * len as f64;
    let start = (centre - 0.5 * width as f64 + 1e-9).floor();
    (start.max(0.0) as usize).min(len - width)
}
