use rand_chacha::ChaCha8Rng;

use super::config::CurriculumConfig;
use super::weights::WeightVector;
use crate::data::SamplePair;
use crate::error::Result;

/// Attaches the token-wise weights for `step` to every sentence of an
/// SC-selected subset. Sentences outside `selected` are simply not
/// returned, so batches built from the result never see them.
pub fn compose_tc_sc(
    selected: &[usize],
    pairs: &[SamplePair],
    token: &CurriculumConfig,
    step: usize,
) -> Result<Vec<(usize, WeightVector)>> {
    selected
        .iter()
        .map(|&i| {
            let w = token.token_weights::<ChaCha8Rng>(pairs[i].target.len(), step, None, None)?;
            Ok((i, w))
        })
        .collect()
}
