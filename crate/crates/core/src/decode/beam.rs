use std::collections::HashMap;

use crate::data::{BOS, EOS};
use crate::error::{Error, Result};

/// A left-to-right scorer: feed one token, get the next-token log-probabilities.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    /// State before the begin marker has been fed.
    fn start(&self) -> Result<Self::State>;

    /// Feeds `token` and returns the new state with `log p(. | prefix)`.
    fn step(&self, state: &Self::State, token: usize) -> Result<(Self::State, Vec<f64>)>;
}

/// Length penalty `((5 + len) / 6) ^ alpha`; `alpha = 0` gives 1.
pub fn length_penalty(len: usize, alpha: f64) -> f64 {
    ((5.0 + len as f64) / 6.0).powf(alpha)
}

/// A finished output. `tokens` ends with end-of-sequence and `len` in the
/// penalty counts that marker.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub logprob: f64,
    pub score: f64,
}

impl Hypothesis {
    pub fn new(tokens: Vec<usize>, logprob: f64, alpha: f64) -> Self {
        let score = logprob / length_penalty(tokens.len(), alpha);
        Self { tokens, logprob, score }
    }

    /// Tokens without the trailing end-of-sequence.
    pub fn words(&self) -> &[usize] {
        match self.tokens.last() {
            Some(&EOS) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

/// Best hypothesis first, then the rest of the finished set by score.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamOutput {
    pub best: Hypothesis,
    pub n_best: Vec<Hypothesis>,
}

struct Live<S> {
    tokens: Vec<usize>,
    logprob: f64,
    state: S,
    next: Vec<f64>,
}

/// Beam search with the length-penalized score `logprob / lp(len)`.
///
/// At every step the candidates (all one-token extensions of the live
/// beams) are ranked by cumulative log-probability and the first `beam` of
/// them are accepted: end-of-sequence candidates become finished
/// hypotheses, the others stay live. End-of-sequence is forced at
/// `max_len` tokens. The search stops when no beam is live, or when `beam`
/// hypotheses are finished and none of the live beams could still beat the
/// best one. With `beam = 1` this is greedy decoding with ties resolved to
/// the lowest token id.
pub fn beam_search<M: StepModel>(model: &M, beam: usize, alpha: f64, max_len: usize) -> Result<BeamOutput> {
    if beam == 0 || max_len == 0 {
        return Err(Error::invalid("beam search needs beam >= 1 and max_len >= 1"));
    }
    let vocab = model.vocab_size();
    let (state, next) = model.step(&model.start()?, BOS)?;
    let mut live = vec![Live {
        tokens: Vec::new(),
        logprob: 0.0,
        state,
        next,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for depth in 0..max_len {
        let last = depth + 1 == max_len;
        // (cumulative logprob, parent, token logprob, token)
        let mut cands: Vec<(f64, usize, f64, usize)> = Vec::new();
        for (b, l) in live.iter().enumerate() {
            if l.next.len() != vocab {
                return Err(Error::invalid(format!("model returned {} scores for vocab {vocab}", l.next.len())));
            }
            for (tok, &lp) in l.next.iter().enumerate() {
                if last && tok != EOS {
                    continue;
                }
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                cands.push((l.logprob + lp, b, lp, tok));
            }
        }
        cands.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(b.2.total_cmp(&a.2))
                .then(a.3.cmp(&b.3))
        });
        cands.truncate(beam);
        let mut next_live = Vec::new();
        for (logprob, parent, _, tok) in cands {
            let mut tokens = live[parent].tokens.clone();
            tokens.push(tok);
            if tok == EOS {
                finished.push(Hypothesis::new(tokens, logprob, alpha));
            } else {
                let (state, next) = model.step(&live[parent].state, tok)?;
                next_live.push(Live {
                    tokens,
                    logprob,
                    state,
                    next,
                });
            }
        }
        live = next_live;
        if live.is_empty() {
            break;
        }
        if finished.len() >= beam && alpha >= 0.0 {
            let best = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
            // a live beam can at best keep its logprob and reach max_len
            let bound = live
                .iter()
                .map(|l| l.logprob / length_penalty(max_len, alpha))
                .fold(f64::NEG_INFINITY, f64::max);
            if best >= bound {
                break;
            }
        }
    }
    if finished.is_empty() {
        return Err(Error::invalid("beam search finished no hypothesis"));
    }
    // stable: earlier-finished wins ties
    let mut order: Vec<usize> = (0..finished.len()).collect();
    order.sort_by(|&a, &b| finished[b].score.total_cmp(&finished[a].score).then(a.cmp(&b)));
    let n_best: Vec<Hypothesis> = order.into_iter().map(|i| finished[i].clone()).collect();
    Ok(BeamOutput {
        best: n_best[0].clone(),
        n_best,
    })
}

/// Greedy decoding through the [`StepModel`] interface.
pub fn greedy<M: StepModel>(model: &M, max_len: usize) -> Result<Hypothesis> {
    if max_len == 0 {
        return Err(Error::invalid("max_len must be positive"));
    }
    let (mut state, mut next) = model.step(&model.start()?, BOS)?;
    let mut tokens = Vec::new();
    let mut logprob = 0.0;
    loop {
        let tok = if tokens.len() + 1 == max_len {
            EOS
        } else {
            let mut best = 0;
            for (i, &v) in next.iter().enumerate() {
                if v > next[best] {
                    best = i;
                }
            }
            best
        };
        logprob += next[tok];
        tokens.push(tok);
        if tok == EOS {
            return Ok(Hypothesis::new(tokens, logprob, 0.0));
        }
        (state, next) = model.step(&state, tok)?;
    }
}

/// A model defined by explicit next-token probability tables keyed by the
/// prefix generated so far (without the begin marker). Prefixes missing
/// from the table fall back to `default`.
#[derive(Clone, Debug)]
pub struct TableModel {
    pub vocab: usize,
    pub tables: HashMap<Vec<usize>, Vec<f64>>,
    pub default: Vec<f64>,
}

impl TableModel {
    pub fn new(vocab: usize, default: Vec<f64>) -> Result<Self> {
        check_distribution(&default, vocab)?;
        Ok(Self {
            vocab,
            tables: HashMap::new(),
            default,
        })
    }

    pub fn set(&mut self, prefix: Vec<usize>, probs: Vec<f64>) -> Result<()> {
        check_distribution(&probs, self.vocab)?;
        self.tables.insert(prefix, probs);
        Ok(())
    }

    pub fn probs(&self, prefix: &[usize]) -> &[f64] {
        self.tables.get(prefix).unwrap_or(&self.default)
    }
}

fn check_distribution(p: &[f64], vocab: usize) -> Result<()> {
    if p.len() != vocab {
        return Err(Error::invalid(format!("{} probabilities for vocab {vocab}", p.len())));
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("table row is not a probability distribution"));
    }
    Ok(())
}

impl StepModel for TableModel {
    type State = Option<Vec<usize>>;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn start(&self) -> Result<Self::State> {
        Ok(None)
    }

    fn step(&self, state: &Self::State, token: usize) -> Result<(Self::State, Vec<f64>)> {
        let prefix = match state {
            None => Vec::new(),
            Some(p) => {
                let mut p = p.clone();
                p.push(token);
                p
            }
        };
        let lp = self.probs(&prefix).iter().map(|v| v.ln()).collect();
        Ok((Some(prefix), lp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// vocab {0, 1, EOS=2, 3}
    fn toy() -> TableModel {
        let mut m = TableModel::new(4, vec![0.3, 0.2, 0.4, 0.1]).unwrap();
        m.set(vec![], vec![0.5, 0.1, 0.05, 0.35]).unwrap();
        m.set(vec![0], vec![0.1, 0.1, 0.3, 0.5]).unwrap();
        m.set(vec![3], vec![0.05, 0.05, 0.9, 0.0]).unwrap();
        m
    }

    fn enumerate(m: &TableModel, max_len: usize, alpha: f64) -> Hypothesis {
        let mut best: Option<Hypothesis> = None;
        let mut stack = vec![(Vec::<usize>::new(), 0.0)];
        while let Some((prefix, lp)) = stack.pop() {
            let p = m.probs(&prefix);
            for tok in 0..4 {
                if p[tok] == 0.0 || (prefix.len() + 1 == max_len && tok != EOS) {
                    continue;
                }
                let mut t = prefix.clone();
                t.push(tok);
                let l = lp + p[tok].ln();
                if tok == EOS {
                    let h = Hypothesis::new(t, l, alpha);
                    if best.as_ref().is_none_or(|b| h.score > b.score) {
                        best = Some(h);
                    }
                } else {
                    stack.push((t, l));
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn large_beam_is_exact() {
        let m = toy();
        for alpha in [0.0, 0.6, 1.0, 2.0] {
            let out = beam_search(&m, 64, alpha, 4).unwrap();
            let oracle = enumerate(&m, 4, alpha);
            assert_eq!(out.best.tokens, oracle.tokens, "alpha {alpha}");
            assert!((out.best.score - oracle.score).abs() < 1e-12);
        }
    }

    #[test]
    fn beam_one_is_greedy() {
        let m = toy();
        let b = beam_search(&m, 1, 1.0, 5).unwrap();
        let g = greedy(&m, 5).unwrap();
        assert_eq!(b.best.tokens, g.tokens);
        // greedy chain: 0 (0.5) -> 3 (0.5) -> EOS (0.9)
        assert_eq!(g.tokens, vec![0, 3, EOS]);
    }

    #[test]
    fn forced_termination() {
        let m = TableModel::new(4, vec![0.9, 0.04, 0.01, 0.05]).unwrap();
        let out = beam_search(&m, 3, 1.0, 3).unwrap();
        assert_eq!(out.best.tokens.len(), 3);
        assert_eq!(*out.best.tokens.last().unwrap(), EOS);
    }

    #[test]
    fn zero_penalty_is_raw_logprob() {
        let h = Hypothesis::new(vec![0, 2], -1.5, 0.0);
        assert_eq!(h.score, -1.5);
        assert_eq!(length_penalty(1, 1.0), 1.0);
        assert_eq!(length_penalty(7, 1.0), 2.0);
    }
}
