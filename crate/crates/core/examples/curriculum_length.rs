//! Picks the curriculum length from a baseline run: the first evaluation
//! reaching 70% of the final dev metric.
//!
//! ```text
//! cargo run --release --example curriculum_length
//! ```

use token_curriculum::curriculum::{estimate_curriculum_length, CurriculumConfig, MetricDirection};
use token_curriculum::data::{synth_task, SynthKind};
use token_curriculum::model::{init_params, ModelConfig};
use token_curriculum::train::{train, DevMetric, TrainConfig};

fn main() -> token_curriculum::Result<()> {
    let all = synth_task(SynthKind::Reverse, 2200, 20, 10, 8)?;
    let corpus = all.with_pairs(all.pairs[..2000].to_vec());
    let dev = &all.pairs[2000..];
    let model = ModelConfig {
        source_vocab: corpus.source_vocab.len(),
        target_vocab: corpus.target_vocab.len(),
        embed: 32,
        hidden: 32,
        layers: 1,
        label_smoothing: 0.0,
        ..ModelConfig::default()
    };
    for metric in [DevMetric::Accuracy, DevMetric::Perplexity] {
        let cfg = TrainConfig {
            peak_lr: 3e-3,
            warmup: 100,
            max_steps: 1000,
            batch_tokens: 256,
            eval_interval: 50,
            dev_metric: metric,
            curriculum: CurriculumConfig::default(),
            ..TrainConfig::default()
        };
        let log = train(init_params(&model)?, &corpus, Some(dev), &cfg)?.log;
        let history: Vec<(usize, f64)> = log.iter().filter_map(|r| r.dev_metric.map(|m| (r.step, m))).collect();
        let dir = metric.direction();
        let i = estimate_curriculum_length(&history, 0.7, dir, None)?;
        let (first, last) = (history[0].1, history.last().unwrap().1);
        println!("{metric:?}: first {first:.4}, final {last:.4} -> curriculum length {i}");
        assert!(matches!(dir, MetricDirection::Higher | MetricDirection::Lower));
    }
    Ok(())
}
