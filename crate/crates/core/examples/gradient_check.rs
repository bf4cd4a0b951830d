//! Compares reverse-mode gradients of the weighted teacher-forcing loss
//! with central finite differences on a small model.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use std::collections::BTreeMap;

use token_curriculum::autodiff::{check_gradients_with, NodeId, Stencil, Tensor};
use token_curriculum::curriculum::{soft_weight_vector, WeightVector};
use token_curriculum::data::SamplePair;
use token_curriculum::model::{init_params, weighted_loss_graph, ModelConfig};

fn main() -> token_curriculum::Result<()> {
    let cfg = ModelConfig {
        source_vocab: 10,
        target_vocab: 10,
        embed: 8,
        hidden: 8,
        layers: 1,
        label_smoothing: 0.0,
        ..ModelConfig::default()
    };
    let params = init_params(&cfg)?;
    let pairs = vec![
        SamplePair::new(vec![4, 5, 6, 7], vec![7, 6, 5]),
        SamplePair::new(vec![8, 9], vec![9, 8, 4, 4, 5]),
    ];
    let weights: Vec<WeightVector> = pairs
        .iter()
        .map(|p| soft_weight_vector(p.target.len(), 1000, 4000, 0.7, 25.0))
        .collect();
    let names: Vec<String> = params.tensors().keys().cloned().collect();
    let point: Vec<Tensor> = params.tensors().values().cloned().collect();
    for (stencil, step) in [(Stencil::ThreePoint, 1e-5), (Stencil::FivePoint, 1e-3)] {
        let report = check_gradients_with(
            |g, leaves| {
                let nodes: BTreeMap<String, NodeId> = names.iter().cloned().zip(leaves.iter().copied()).collect();
                Ok(weighted_loss_graph(g, &nodes, &cfg, &pairs, &weights, None)?.loss)
            },
            &point,
            step,
            stencil,
        )?;
        let (k, c) = report.worst;
        println!(
            "{stencil:?} step {step:e}: max relative error {:.3e} over {} coordinates (worst {}[{c}])",
            report.max_rel_error, report.coordinates, names[k]
        );
    }
    Ok(())
}
