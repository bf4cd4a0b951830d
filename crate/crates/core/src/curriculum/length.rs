use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether larger metric values are better (BLEU, accuracy) or worse
/// (perplexity, loss).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricDirection {
    Higher,
    Lower,
}

/// Curriculum length read off a baseline run: the first step whose metric
/// reaches `fraction * final` (higher-better) or
/// `(1 - fraction) * initial + fraction * final` (lower-better).
///
/// `final_value` defaults to the last entry of `history`.
pub fn estimate_curriculum_length(
    history: &[(usize, f64)],
    fraction: f64,
    direction: MetricDirection,
    final_value: Option<f64>,
) -> Result<usize> {
    let (first, last) = match (history.first(), history.last()) {
        (Some(f), Some(l)) => (f.1, l.1),
        _ => return Err(Error::Empty("metric history".into())),
    };
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("target fraction must lie in (0, 1], got {fraction}")));
    }
    let fin = final_value.unwrap_or(last);
    let threshold = match direction {
        MetricDirection::Higher => fraction * fin,
        MetricDirection::Lower => (1.0 - fraction) * first + fraction * fin,
    };
    // absorbs rounding in the threshold product only
    let slack = 1e-12 * threshold.abs();
    let reached = |m: f64| match direction {
        MetricDirection::Higher => m >= threshold - slack,
        MetricDirection::Lower => m <= threshold + slack,
    };
    if let Some(&(step, _)) = history.iter().find(|&&(_, m)| reached(m)) {
        return Ok(step);
    }
    let closest = match direction {
        MetricDirection::Higher => history.iter().map(|h| h.1).fold(f64::NEG_INFINITY, f64::max) / threshold,
        MetricDirection::Lower => threshold / history.iter().map(|h| h.1).fold(f64::INFINITY, f64::min),
    };
    Err(Error::TargetNotReached { closest })
}
