//! Decoder-only language model on arithmetic progressions, trained with
//! and without the soft curriculum, scored by dev perplexity.
//!
//! ```text
//! cargo run --release --example language_model
//! ```

use token_curriculum::curriculum::{CurriculumConfig, Variant};
use token_curriculum::data::{synth_task, SynthKind};
use token_curriculum::decode::perplexity;
use token_curriculum::model::{init_params, ModelConfig, ModelMode};
use token_curriculum::train::{train, DevMetric, TrainConfig};

fn main() -> token_curriculum::Result<()> {
    let all = synth_task(SynthKind::Progression, 2200, 16, 12, 2)?;
    let corpus = all.with_pairs(all.pairs[..2000].to_vec());
    let dev = &all.pairs[2000..];
    let model = ModelConfig {
        source_vocab: corpus.source_vocab.len(),
        target_vocab: corpus.target_vocab.len(),
        mode: ModelMode::DecoderOnly,
        embed: 32,
        hidden: 32,
        layers: 1,
        label_smoothing: 0.0,
        ..ModelConfig::default()
    };
    let params = init_params(&model)?;
    println!("untrained dev perplexity {:.3}", perplexity(&params, dev)?);
    for variant in [Variant::None, Variant::TcSoft] {
        let cfg = TrainConfig {
            peak_lr: 3e-3,
            warmup: 100,
            max_steps: 800,
            batch_tokens: 256,
            eval_interval: 200,
            dev_metric: DevMetric::Perplexity,
            curriculum: CurriculumConfig::new(variant).with_steps(200),
            ..TrainConfig::default()
        };
        let out = train(params.clone(), &corpus, Some(dev), &cfg)?;
        let curve: Vec<String> = out
            .log
            .iter()
            .map(|r| format!("{}:{:.3}", r.step, r.dev_metric.unwrap_or(f64::NAN)))
            .collect();
        println!("{variant}: {}", curve.join("  "));
    }
    Ok(())
}
