use super::net::{bind_constants, Memory, Net};
use super::params::ModelParams;
use crate::autodiff::{Graph, Tensor};
use crate::data::{BOS, EOS, PAD};
use crate::decode::StepModel;
use crate::error::{Error, Result};

/// Encoder output for one source sentence: one state per position.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStates {
    /// `[src_len, hidden]`
    states: Tensor,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> &Tensor {
        &self.states
    }

    pub fn state(&self, position: usize) -> &[f64] {
        self.states.row(position)
    }
}

/// Runs the encoder (eval mode) over one source sentence.
pub fn encode(params: &ModelParams, source: &[usize]) -> Result<EncoderStates> {
    let cfg = params.config();
    if !cfg.has_encoder() {
        return Err(Error::invalid("decoder-only model has no encoder"));
    }
    let mut g = Graph::new();
    let nodes = bind_constants(&mut g, params);
    let mut net = Net::new(&mut g, &nodes, cfg, None);
    let mem = net.encode(&[source])?;
    let states = g.value(mem.states).reshape(vec![source.len(), cfg.hidden])?;
    Ok(EncoderStates { states })
}

/// Incremental decoder over one source, usable by beam search.
pub struct Decoder<'a> {
    params: &'a ModelParams,
    memory: Option<Tensor>,
}

impl<'a> Decoder<'a> {
    /// Encodes `source` (ignored by decoder-only models).
    pub fn new(params: &'a ModelParams, source: &[usize]) -> Result<Self> {
        let memory = if params.config().has_encoder() {
            Some(encode(params, source)?.states)
        } else {
            None
        };
        Ok(Self { params, memory })
    }

    /// Decoder over precomputed encoder states.
    pub fn with_states(params: &'a ModelParams, states: Option<&EncoderStates>) -> Result<Self> {
        let memory = match (params.config().has_encoder(), states) {
            (true, Some(s)) => Some(s.states.clone()),
            (true, None) => return Err(Error::invalid("encoder-decoder model needs encoder states")),
            (false, _) => None,
        };
        Ok(Self { params, memory })
    }
}

impl StepModel for Decoder<'_> {
    type State = Vec<Tensor>;

    fn vocab_size(&self) -> usize {
        self.params.config().target_vocab
    }

    fn start(&self) -> Result<Vec<Tensor>> {
        let cfg = self.params.config();
        Ok(vec![Tensor::zeros(&[1, cfg.hidden]); cfg.layers])
    }

    fn step(&self, state: &Vec<Tensor>, token: usize) -> Result<(Vec<Tensor>, Vec<f64>)> {
        let cfg = self.params.config();
        let mut g = Graph::new();
        let nodes = bind_constants(&mut g, self.params);
        let memory = match &self.memory {
            Some(m) => {
                let src_len = m.shape()[0];
                Some(Memory {
                    states: g.constant(m.reshape(vec![1, src_len, cfg.hidden])?),
                    mask: g.constant(Tensor::zeros(&[1, src_len])),
                })
            }
            None => None,
        };
        let mut hidden: Vec<_> = state.iter().map(|h| g.constant(h.clone())).collect();
        let mut net = Net::new(&mut g, &nodes, cfg, None);
        let out = net.decode_step(memory.as_ref(), &mut hidden, &[token])?;
        let logp = net.log_probs(out)?;
        let next = hidden.iter().map(|&h| g.value(h).clone()).collect();
        Ok((next, g.value(logp).to_vec()))
    }
}

/// `log p(. | prefix, x)` for a prefix starting with the begin marker.
/// Decoder-only models ignore `states`.
pub fn token_log_probs(params: &ModelParams, states: Option<&EncoderStates>, prefix: &[usize]) -> Result<Vec<f64>> {
    if prefix.first() != Some(&BOS) {
        return Err(Error::invalid("prefix must start with the begin-of-sequence marker"));
    }
    if prefix.len() > params.config().max_len {
        return Err(Error::invalid(format!(
            "prefix of {} tokens exceeds max_len {}",
            prefix.len(),
            params.config().max_len
        )));
    }
    let dec = Decoder::with_states(params, states)?;
    let mut state = dec.start()?;
    let mut logp = Vec::new();
    for &tok in prefix {
        (state, logp) = dec.step(&state, tok)?;
    }
    Ok(logp)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Batched greedy decoding. Each output ends with end-of-sequence, forced
/// at `max_len` tokens; ties go to the lowest token id.
pub fn greedy_decode_batch(params: &ModelParams, sources: &[&[usize]], max_len: usize) -> Result<Vec<Vec<usize>>> {
    let cfg = params.config();
    let batch = sources.len();
    if batch == 0 {
        return Ok(Vec::new());
    }
    if max_len == 0 {
        return Err(Error::invalid("max_len must be positive"));
    }
    let mut g = Graph::new();
    let nodes = bind_constants(&mut g, params);
    let mut net = Net::new(&mut g, &nodes, cfg, None);
    let memory = if cfg.has_encoder() { Some(net.encode(sources)?) } else { None };
    let mut hidden = net.zeros(batch);
    let mut outputs: Vec<Vec<usize>> = vec![Vec::new(); batch];
    let mut ids = vec![BOS; batch];
    for step in 0..max_len {
        let out = net.decode_step(memory.as_ref(), &mut hidden, &ids)?;
        let logp = net.log_probs(out)?;
        let values = net.g.value(logp).clone();
        let mut all_done = true;
        for (b, o) in outputs.iter_mut().enumerate() {
            if o.last() == Some(&EOS) {
                ids[b] = PAD;
                continue;
            }
            let tok = if step + 1 == max_len { EOS } else { argmax(values.row(b)) };
            o.push(tok);
            ids[b] = tok;
            all_done &= tok == EOS;
        }
        if all_done {
            break;
        }
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig, ModelMode};

    fn cfg() -> ModelConfig {
        ModelConfig {
            source_vocab: 10,
            target_vocab: 8,
            embed: 6,
            hidden: 5,
            layers: 2,
            seed: 2,
            max_len: 10,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn one_state_per_position() {
        let p = init_params(&cfg()).unwrap();
        let s = encode(&p, &[4, 5, 6, 7]).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.states().shape(), &[4, 5]);
        assert!(encode(&p, &[]).is_err());
        assert!(matches!(encode(&p, &[4, 10]), Err(Error::OutOfVocab { id: 10, vocab: 10 })));
    }

    #[test]
    fn permuting_inputs_changes_states() {
        let p = init_params(&cfg()).unwrap();
        let a = encode(&p, &[4, 5, 6]).unwrap();
        let b = encode(&p, &[5, 4, 6]).unwrap();
        assert_ne!(a.state(2), b.state(2));
    }

    #[test]
    fn distribution_normalized_and_uniform_when_zeroed() {
        let mut p = init_params(&cfg()).unwrap();
        let s = encode(&p, &[4, 5]).unwrap();
        let lp = token_log_probs(&p, Some(&s), &[BOS, 4, 6]).unwrap();
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        p.zero_output_layer();
        let lp = token_log_probs(&p, Some(&s), &[BOS]).unwrap();
        assert!(lp.iter().all(|&v| v == -(8f64.ln())));
        assert!(token_log_probs(&p, Some(&s), &[4]).is_err());
        assert!(token_log_probs(&p, Some(&s), &[BOS; 11]).is_err());
    }

    #[test]
    fn decoder_only_ignores_states() {
        let enc = init_params(&cfg()).unwrap();
        let states = encode(&enc, &[4, 5]).unwrap();
        let lm = init_params(&ModelConfig {
            mode: ModelMode::DecoderOnly,
            source_vocab: 0,
            ..cfg()
        })
        .unwrap();
        let with = token_log_probs(&lm, Some(&states), &[BOS, 5]).unwrap();
        let without = token_log_probs(&lm, None, &[BOS, 5]).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn greedy_batch_matches_single() {
        let p = init_params(&cfg()).unwrap();
        let srcs: Vec<&[usize]> = vec![&[4, 5, 6], &[7], &[8, 9]];
        let batched = greedy_decode_batch(&p, &srcs, 6).unwrap();
        for (s, out) in srcs.iter().zip(&batched) {
            assert_eq!(&greedy_decode_batch(&p, &[s], 6).unwrap()[0], out);
            assert_eq!(*out.last().unwrap(), EOS);
            assert!(out.len() <= 6);
        }
    }
}
