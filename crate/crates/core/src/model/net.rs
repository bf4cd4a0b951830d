//! Graph construction for the recurrent encoder-decoder.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::data::PAD;
use crate::error::{Error, Result};

/// Added to attention scores of padded source positions.
const MASKED: f64 = -1e9;

/// Encoder output for a padded batch.
pub(crate) struct Memory {
    /// `[batch, src_len, hidden]`
    pub states: NodeId,
    /// `[batch, src_len]`, 0 on real positions and a large negative on padding.
    pub mask: NodeId,
}

/// Binds every parameter as a trainable leaf.
pub(crate) fn bind_params(g: &mut Graph, params: &ModelParams) -> BTreeMap<String, NodeId> {
    params
        .tensors()
        .iter()
        .map(|(name, t)| (name.clone(), g.param(name, t.clone())))
        .collect()
}

/// Binds every parameter as a constant (inference, no gradients).
pub(crate) fn bind_constants(g: &mut Graph, params: &ModelParams) -> BTreeMap<String, NodeId> {
    params
        .tensors()
        .iter()
        .map(|(name, t)| (name.clone(), g.constant(t.clone())))
        .collect()
}

pub(crate) struct Net<'a> {
    pub g: &'a mut Graph,
    nodes: &'a BTreeMap<String, NodeId>,
    pub cfg: &'a ModelConfig,
    dropout: Option<&'a mut ChaCha8Rng>,
}

impl<'a> Net<'a> {
    pub fn new(g: &'a mut Graph, nodes: &'a BTreeMap<String, NodeId>, cfg: &'a ModelConfig, dropout: Option<&'a mut ChaCha8Rng>) -> Self {
        Self { g, nodes, cfg, dropout }
    }

    fn p(&self, name: &str) -> NodeId {
        self.nodes[name]
    }

    fn drop(&mut self, x: NodeId) -> Result<NodeId> {
        let rate = self.cfg.dropout;
        let Some(rng) = self.dropout.as_deref_mut() else {
            return Ok(x);
        };
        if rate == 0.0 {
            return Ok(x);
        }
        let shape = self.g.shape(x).to_vec();
        let n = shape.iter().product();
        let keep = 1.0 / (1.0 - rate);
        let mask = (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
        let m = self.g.constant(Tensor::new(shape, mask)?);
        self.g.mul(x, m)
    }

    /// One GRU update for the layer named `prefix`.
    fn gru(&mut self, prefix: &str, x: NodeId, h: NodeId) -> Result<NodeId> {
        let hd = self.cfg.hidden;
        let wx = self.p(&format!("{prefix}.wx"));
        let wh = self.p(&format!("{prefix}.wh"));
        let bx = self.p(&format!("{prefix}.bx"));
        let bh = self.p(&format!("{prefix}.bh"));
        let g = &mut *self.g;
        let gx = g.matmul(x, wx)?;
        let gx = g.add_bias(gx, bx)?;
        let gh = g.matmul(h, wh)?;
        let gh = g.add_bias(gh, bh)?;
        let rx = g.slice(gx, 0, hd)?;
        let rh = g.slice(gh, 0, hd)?;
        let r = g.add(rx, rh)?;
        let r = g.sigmoid(r)?;
        let zx = g.slice(gx, hd, hd)?;
        let zh = g.slice(gh, hd, hd)?;
        let z = g.add(zx, zh)?;
        let z = g.sigmoid(z)?;
        let nx = g.slice(gx, 2 * hd, hd)?;
        let nh = g.slice(gh, 2 * hd, hd)?;
        let nh = g.mul(r, nh)?;
        let n = g.add(nx, nh)?;
        let n = g.tanh(n)?;
        // h' = n + z * (h - n)
        let d = g.sub(h, n)?;
        let d = g.mul(z, d)?;
        g.add(n, d)
    }

    pub fn zeros(&mut self, batch: usize) -> Vec<NodeId> {
        (0..self.cfg.layers)
            .map(|_| self.g.constant(Tensor::zeros(&[batch, self.cfg.hidden])))
            .collect()
    }

    /// Runs the encoder over right-padded `sources`.
    pub fn encode(&mut self, sources: &[&[usize]]) -> Result<Memory> {
        let batch = sources.len();
        let src_len = sources.iter().map(|s| s.len()).max().unwrap_or(0);
        if batch == 0 || src_len == 0 {
            return Err(Error::Empty("source sentence".into()));
        }
        for s in sources {
            if s.is_empty() {
                return Err(Error::Empty("source sentence".into()));
            }
            if let Some(&id) = s.iter().find(|&&id| id >= self.cfg.source_vocab) {
                return Err(Error::OutOfVocab {
                    id,
                    vocab: self.cfg.source_vocab,
                });
            }
        }
        let embed = self.p("enc.embed");
        let mut hidden = self.zeros(batch);
        let mut tops = Vec::with_capacity(src_len);
        for t in 0..src_len {
            let ids: Vec<usize> = sources.iter().map(|s| s.get(t).copied().unwrap_or(PAD)).collect();
            let x = self.g.gather(embed, &ids)?;
            let mut x = self.drop(x)?;
            for (k, h) in hidden.iter_mut().enumerate() {
                *h = self.gru(&format!("enc.l{k}"), x, *h)?;
                x = *h;
            }
            tops.push(x);
        }
        let flat = self.g.concat(&tops)?;
        let states = self.g.reshape(flat, &[batch, src_len, self.cfg.hidden])?;
        let mask: Vec<f64> = sources
            .iter()
            .flat_map(|s| (0..src_len).map(move |t| if t < s.len() { 0.0 } else { MASKED }))
            .collect();
        let mask = self.g.constant(Tensor::new(vec![batch, src_len], mask)?);
        Ok(Memory { states, mask })
    }

    /// Feeds `ids` (one per batch row) through the decoder, updating
    /// `hidden`, and returns the attentional output `[batch, hidden]`.
    pub fn decode_step(&mut self, memory: Option<&Memory>, hidden: &mut [NodeId], ids: &[usize]) -> Result<NodeId> {
        if let Some(&id) = ids.iter().find(|&&id| id >= self.cfg.target_vocab) {
            return Err(Error::OutOfVocab {
                id,
                vocab: self.cfg.target_vocab,
            });
        }
        let batch = ids.len();
        let hd = self.cfg.hidden;
        let embed = self.p("dec.embed");
        let x = self.g.gather(embed, ids)?;
        let mut x = self.drop(x)?;
        for (k, h) in hidden.iter_mut().enumerate() {
            *h = self.gru(&format!("dec.l{k}"), x, *h)?;
            x = *h;
        }
        let features = match memory {
            Some(mem) if self.cfg.has_encoder() => {
                let src_len = self.g.shape(mem.states)[1];
                let q = self.g.reshape(x, &[batch, hd, 1])?;
                let scores = self.g.batch_matmul(mem.states, q)?;
                let scores = self.g.reshape(scores, &[batch, src_len])?;
                let scores = self.g.add(scores, mem.mask)?;
                let attn = self.g.softmax(scores)?;
                let attn = self.g.reshape(attn, &[batch, 1, src_len])?;
                let ctx = self.g.batch_matmul(attn, mem.states)?;
                let ctx = self.g.reshape(ctx, &[batch, hd])?;
                self.g.concat(&[x, ctx])?
            }
            _ => x,
        };
        let (w, b) = (self.p("dec.combine.w"), self.p("dec.combine.b"));
        let out = self.g.matmul(features, w)?;
        let out = self.g.add_bias(out, b)?;
        let out = self.g.tanh(out)?;
        self.drop(out)
    }

    /// Next-token log-probabilities for stacked outputs `[rows, hidden]`.
    pub fn log_probs(&mut self, out: NodeId) -> Result<NodeId> {
        let (w, b) = (self.p("out.w"), self.p("out.b"));
        let logits = self.g.matmul(out, w)?;
        let logits = self.g.add_bias(logits, b)?;
        self.g.log_softmax(logits)
    }
}
