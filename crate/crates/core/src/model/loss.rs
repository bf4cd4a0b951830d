use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::net::{bind_constants, bind_params, Net};
use super::params::ModelParams;
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::curriculum::WeightVector;
use crate::data::{SamplePair, BOS, PAD};
use crate::error::{Error, Result};

/// Scalar batch loss plus the per-token negative log-likelihoods
/// (with label smoothing, if configured) of every target.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub token_losses: Vec<Vec<f64>>,
}

/// Nodes produced by [`weighted_loss_graph`].
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub loss: NodeId,
    /// `[batch * max_target_len, 1]`, row `b * max_target_len + t`.
    pub token_nll: NodeId,
    pub max_target_len: usize,
}

fn check_weights(pairs: &[SamplePair], weights: &[WeightVector]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Empty("loss over an empty batch".into()));
    }
    if pairs.len() != weights.len() {
        return Err(Error::invalid(format!("{} weight vectors for {} sentences", weights.len(), pairs.len())));
    }
    for (p, w) in pairs.iter().zip(weights) {
        if w.len() != p.target.len() {
            return Err(Error::LengthMismatch {
                weights: w.len(),
                target: p.target.len(),
            });
        }
        if let Some((position, &value)) = w.weights().iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::WeightOutOfRange { position, value });
        }
    }
    Ok(())
}

/// Builds the curriculum-weighted teacher-forcing loss on `g` from already
/// bound parameter nodes.
///
/// Each sentence contributes `sum_t w_t * nll_t / norm`, where `norm` is the
/// number of selected tokens for binary weights and the target length for
/// soft weights; the batch loss is the mean over sentences.
pub fn weighted_loss_graph(
    g: &mut Graph,
    nodes: &BTreeMap<String, NodeId>,
    config: &ModelConfig,
    pairs: &[SamplePair],
    weights: &[WeightVector],
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<LossNodes> {
    check_weights(pairs, weights)?;
    let batch = pairs.len();
    let t_max = pairs.iter().map(|p| p.target.len()).max().unwrap_or(0);
    if t_max == 0 {
        return Err(Error::Empty("target sentence".into()));
    }
    if t_max > config.max_len {
        return Err(Error::invalid(format!("target of {t_max} tokens exceeds max_len {}", config.max_len)));
    }
    let mut net = Net::new(g, nodes, config, dropout);
    let memory = if config.has_encoder() {
        let sources: Vec<&[usize]> = pairs.iter().map(|p| p.source.as_slice()).collect();
        Some(net.encode(&sources)?)
    } else {
        None
    };
    let mut hidden = net.zeros(batch);
    let mut outs = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let ids: Vec<usize> = pairs
            .iter()
            .map(|p| match t {
                0 => BOS,
                _ => p.target.get(t - 1).copied().unwrap_or(PAD),
            })
            .collect();
        outs.push(net.decode_step(memory.as_ref(), &mut hidden, &ids)?);
    }
    let stacked = net.g.concat(&outs)?;
    let stacked = net.g.reshape(stacked, &[batch * t_max, config.hidden])?;
    let logp = net.log_probs(stacked)?;
    let mut targets = Vec::with_capacity(batch * t_max);
    let mut coef = Vec::with_capacity(batch * t_max);
    for (p, w) in pairs.iter().zip(weights) {
        let c = w.coefficients();
        for t in 0..t_max {
            targets.push(p.target.get(t).copied().unwrap_or(PAD));
            coef.push(c.get(t).map_or(0.0, |v| v / batch as f64));
        }
    }
    let token_nll = net.g.nll(logp, &targets, config.label_smoothing)?;
    let loss = net.g.weighted_sum(token_nll, coef)?;
    Ok(LossNodes {
        loss,
        token_nll,
        max_target_len: t_max,
    })
}

fn report(g: &Graph, nodes: &LossNodes, pairs: &[SamplePair]) -> LossReport {
    let nll = g.value(nodes.token_nll).data();
    LossReport {
        loss: g.value(nodes.loss).data()[0],
        token_losses: pairs
            .iter()
            .enumerate()
            .map(|(b, p)| nll[b * nodes.max_target_len..b * nodes.max_target_len + p.target.len()].to_vec())
            .collect(),
    }
}

/// Weighted loss without gradients (dropout off).
pub fn weighted_teacher_forcing_loss(params: &ModelParams, pairs: &[SamplePair], weights: &[WeightVector]) -> Result<LossReport> {
    let mut g = Graph::new();
    let nodes = bind_constants(&mut g, params);
    let out = weighted_loss_graph(&mut g, &nodes, params.config(), pairs, weights, None)?;
    Ok(report(&g, &out, pairs))
}

/// Weighted loss and its gradient with respect to every parameter.
pub fn loss_and_gradients(
    params: &ModelParams,
    pairs: &[SamplePair],
    weights: &[WeightVector],
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<(LossReport, BTreeMap<String, Tensor>)> {
    let mut g = Graph::new();
    let nodes = bind_params(&mut g, params);
    let out = weighted_loss_graph(&mut g, &nodes, params.config(), pairs, weights, dropout)?;
    let grads = g.backward(out.loss)?;
    Ok((report(&g, &out, pairs), grads.into_params()))
}
