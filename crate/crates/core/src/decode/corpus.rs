use super::beam::beam_search;
use crate::error::Result;
use crate::model::{greedy_decode_batch, Decoder, ModelParams};

/// Decodes every source. `beam = 1` runs batched greedy decoding, which
/// gives the same outputs as a one-wide beam. Outputs end with the end
/// marker, forced at `max_len`.
pub fn decode_corpus(params: &ModelParams, sources: &[&[usize]], beam: usize, alpha: f64, max_len: usize) -> Result<Vec<Vec<usize>>> {
    if beam == 1 {
        let mut out = Vec::with_capacity(sources.len());
        for chunk in sources.chunks(256) {
            out.extend(greedy_decode_batch(params, chunk, max_len)?);
        }
        return Ok(out);
    }
    sources
        .iter()
        .map(|src| Ok(beam_search(&Decoder::new(params, src)?, beam, alpha, max_len)?.best.tokens))
        .collect()
}
