//! Token-wise hard and soft schedules.
//!
//! Step indices `i` count optimizer updates from zero. Once `i >= total`
//! both schedules return the plain training objective.

use super::weights::WeightVector;

/// Slack absorbing rounding error before a floor, so that products which are
/// mathematically integral (e.g. `20 * 0.55`) land on the right side.
const FLOOR_SLACK: f64 = 1e-9;

/// Prefix length selected by the hard curriculum at update `step`.
///
/// `floor(len * (lambda0 + step/total * (1 - lambda0)))`, clamped to
/// `[1, len]`, and `len` from `total` onwards.
pub fn hard_subseq_length(len: usize, step: usize, total: usize, lambda0: f64) -> usize {
    debug_assert!(len >= 1 && total >= 1);
    if step >= total {
        return len;
    }
    let progress = step as f64 / total as f64;
    let raw = len as f64 * (lambda0 + progress * (1.0 - lambda0));
    ((raw + FLOOR_SLACK).floor() as usize).clamp(1, len)
}

/// Binary mask selecting the first [`hard_subseq_length`] tokens.
pub fn hard_weight_vector(len: usize, step: usize, total: usize, lambda0: f64) -> WeightVector {
    WeightVector::from_positions(len, 0..hard_subseq_length(len, step, total, lambda0))
}

/// Decay base `gamma_i = gamma0 + step/total * (1 - gamma0)`, 1 once `step >= total`.
pub fn soft_decay_factor(step: usize, total: usize, gamma0: f64) -> f64 {
    if step >= total {
        return 1.0;
    }
    gamma0 + step as f64 / total as f64 * (1.0 - gamma0)
}

/// Exponent `alpha0 * (t - 1) / (len - 1)` for 1-based position `t`; 0 when `len == 1`.
pub fn soft_power_factor(t: usize, len: usize, alpha0: f64) -> f64 {
    debug_assert!(t >= 1 && t <= len);
    if len == 1 {
        return 0.0;
    }
    alpha0 * (t - 1) as f64 / (len - 1) as f64
}

/// Geometrically decaying weights `gamma_i ^ alpha(t, len)`.
pub fn soft_weight_vector(len: usize, step: usize, total: usize, gamma0: f64, alpha0: f64) -> WeightVector {
    let gamma = soft_decay_factor(step, total, gamma0);
    let weights = (1..=len)
        .map(|t| gamma.powf(soft_power_factor(t, len, alpha0)))
        .collect();
    WeightVector::soft_unchecked(weights)
}
