use std::collections::BTreeMap;

use rand::Rng;

use super::config::ModelConfig;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{keyed, mix64};

#[derive(Clone, Copy)]
enum Init {
    Zero,
    Uniform(f64),
}

fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let (e, h) = (cfg.embed, cfg.hidden);
    let recur = 1.0 / (h as f64).sqrt();
    let mut out = Vec::new();
    let gru = |out: &mut Vec<(String, Vec<usize>, Init)>, side: &str| {
        for k in 0..cfg.layers {
            let input = if k == 0 { e } else { h };
            out.push((format!("{side}.l{k}.wx"), vec![input, 3 * h], Init::Uniform(recur)));
            out.push((format!("{side}.l{k}.wh"), vec![h, 3 * h], Init::Uniform(recur)));
            out.push((format!("{side}.l{k}.bx"), vec![3 * h], Init::Zero));
            out.push((format!("{side}.l{k}.bh"), vec![3 * h], Init::Zero));
        }
    };
    if cfg.has_encoder() {
        out.push(("enc.embed".into(), vec![cfg.source_vocab, e], Init::Uniform(0.5)));
        gru(&mut out, "enc");
    }
    out.push(("dec.embed".into(), vec![cfg.target_vocab, e], Init::Uniform(0.5)));
    gru(&mut out, "dec");
    let combine_in = if cfg.has_encoder() { 2 * h } else { h };
    out.push(("dec.combine.w".into(), vec![combine_in, h], Init::Uniform(1.0 / (combine_in as f64).sqrt())));
    out.push(("dec.combine.b".into(), vec![h], Init::Zero));
    out.push(("out.w".into(), vec![h, cfg.target_vocab], Init::Uniform(recur)));
    out.push(("out.b".into(), vec![cfg.target_vocab], Init::Zero));
    out
}

fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xCBF2_9CE4_8422_2325, |acc, b| mix64(acc ^ b as u64))
}

/// Every trainable tensor of the model, keyed by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
}

/// Draws parameters from `config.seed`. Each tensor has its own stream, so
/// the draw of one tensor never depends on the others.
pub fn init_params(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let tensors = layout(config)
        .into_iter()
        .map(|(name, shape, init)| {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zero => vec![0.0; n],
                Init::Uniform(r) => {
                    let mut rng = keyed(config.seed, &[name_key(&name)]);
                    (0..n).map(|_| rng.gen_range(-r..r)).collect()
                }
            };
            (name, Tensor::from_parts(shape, data))
        })
        .collect();
    Ok(ModelParams {
        config: config.clone(),
        tensors,
    })
}

impl ModelParams {
    /// Rebuilds parameters from stored tensors, checking names and shapes.
    pub fn from_tensors(config: ModelConfig, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config);
        if tensors.len() != expected.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {}", expected.len(), tensors.len())));
        }
        for (name, shape, _) in &expected {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape())));
            }
        }
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Replaces one tensor; the shape must stay the same.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("no parameter named `{name}`")))?;
        if slot.shape() != value.shape() {
            return Err(Error::invalid(format!("`{name}` has shape {:?}, got {:?}", slot.shape(), value.shape())));
        }
        *slot = value;
        Ok(())
    }

    /// Zeroes the output projection so every next-token distribution is uniform.
    pub fn zero_output_layer(&mut self) {
        for name in ["out.w", "out.b"] {
            let t = &self.tensors[name];
            let zero = Tensor::zeros(t.shape());
            self.tensors.insert(name.to_string(), zero);
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn bit_eq(&self, other: &ModelParams) -> bool {
        self.config == other.config
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|((na, a), (nb, b))| na == nb && a.bit_eq(b))
    }
}
