//! Trains the attention model on the copy task with the soft token-wise
//! curriculum and prints the training log.
//!
//! ```text
//! cargo run --release --example train_copy -- [variant] [steps]
//! ```

use token_curriculum::curriculum::{CurriculumConfig, Variant};
use token_curriculum::data::{synth_task, SynthKind};
use token_curriculum::model::{init_params, ModelConfig};
use token_curriculum::train::{train, DevMetric, TrainConfig};

fn main() -> token_curriculum::Result<()> {
    let mut args = std::env::args().skip(1);
    let variant: Variant = args.next().as_deref().unwrap_or("tc-soft").parse()?;
    let steps: usize = args.next().map_or(1500, |s| s.parse().expect("step count"));

    let all = synth_task(SynthKind::Copy, 2200, 20, 12, 1)?;
    let corpus = all.with_pairs(all.pairs[..2000].to_vec());
    let dev = &all.pairs[2000..];
    let params = init_params(&ModelConfig {
        source_vocab: corpus.source_vocab.len(),
        target_vocab: corpus.target_vocab.len(),
        embed: 32,
        hidden: 32,
        layers: 1,
        label_smoothing: 0.0,
        ..ModelConfig::default()
    })?;
    let cfg = TrainConfig {
        peak_lr: 3e-3,
        warmup: 100,
        max_steps: steps,
        batch_tokens: 256,
        eval_interval: 100,
        dev_metric: DevMetric::Accuracy,
        curriculum: CurriculumConfig::new(variant).with_steps(steps / 5),
        ..TrainConfig::default()
    };
    println!("{variant}, {} parameters", params.num_parameters());
    let out = train(params, &corpus, Some(dev), &cfg)?;
    for r in &out.log {
        println!(
            "step {:5}  lr {:.2e}  loss {:.4}  accuracy {:.4}  trigrams {}",
            r.step,
            r.lr,
            r.loss,
            r.dev_metric.unwrap_or(f64::NAN),
            r.unique_trigrams
        );
    }
    Ok(())
}
