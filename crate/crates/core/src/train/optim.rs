use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Linear warmup to `peak` at `warmup`, then `peak * sqrt(warmup / step)`.
/// `step` is 1-based.
pub fn lr_schedule(step: usize, warmup: usize, peak: f64) -> f64 {
    let (s, w) = (step.max(1) as f64, warmup.max(1) as f64);
    if s <= w {
        peak * s / w
    } else {
        peak * (w / s).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub step: u64,
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
}

impl AdamState {
    pub fn new(params: &ModelParams, hyper: AdamHyper) -> Self {
        let zeros: BTreeMap<String, Tensor> = params
            .tensors()
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
            .collect();
        Self {
            hyper,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update with decoupled weight decay:
/// `p -= lr * (m_hat / (sqrt(v_hat) + eps) + decay * p)`.
///
/// Every gradient is checked for finiteness before anything is modified.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &BTreeMap<String, Tensor>,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    for (name, p) in params.tensors() {
        let g = grads
            .get(name)
            .ok_or_else(|| Error::invalid(format!("no gradient for `{name}`")))?;
        if g.shape() != p.shape() {
            return Err(Error::invalid(format!("gradient for `{name}` has shape {:?}, expected {:?}", g.shape(), p.shape())));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient of `{name}`")));
        }
    }
    let AdamHyper { beta1, beta2, eps } = state.hyper;
    state.step += 1;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    let names: Vec<String> = params.tensors().keys().cloned().collect();
    for name in names {
        let g = grads[&name].data();
        let mut m = state.m[&name].to_vec();
        let mut v = state.v[&name].to_vec();
        let mut p = params.get(&name).expect("known name").to_vec();
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            p[i] -= lr * (update + weight_decay * p[i]);
        }
        let shape = grads[&name].shape().to_vec();
        state.m.insert(name.clone(), Tensor::new(shape.clone(), m)?);
        state.v.insert(name.clone(), Tensor::new(shape.clone(), v)?);
        params.set(&name, Tensor::new(shape, p)?)?;
    }
    Ok(())
}

/// L2 norm over all gradients.
pub fn global_norm(grads: &BTreeMap<String, Tensor>) -> f64 {
    grads
        .values()
        .flat_map(|t| t.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}
