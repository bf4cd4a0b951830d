//! Baseline against the soft token-wise curriculum on digits-to-words
//! (5000 pairs, up to 12 digits). The curriculum length of each seed comes
//! from its own baseline log; the table reports steps to 80% dev token
//! accuracy and the final accuracy.
//!
//! ```text
//! cargo run --release --example digits_benchmark -- [seeds]
//! ```

use token_curriculum::curriculum::{estimate_curriculum_length, CurriculumConfig, MetricDirection, Variant};
use token_curriculum::data::{synth_task, SamplePair, SynthKind};
use token_curriculum::model::{init_params, ModelConfig};
use token_curriculum::train::{steps_to_threshold, train, DevMetric, TrainConfig, TrainLogRecord};

fn run(corpus: &token_curriculum::data::ParallelCorpus, dev: &[SamplePair], seed: u64, curriculum: CurriculumConfig) -> token_curriculum::Result<Vec<TrainLogRecord>> {
    let model = ModelConfig {
        source_vocab: corpus.source_vocab.len(),
        target_vocab: corpus.target_vocab.len(),
        embed: 32,
        hidden: 32,
        layers: 1,
        label_smoothing: 0.0,
        seed,
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        peak_lr: 3e-3,
        warmup: 100,
        max_steps: 2000,
        batch_tokens: 256,
        eval_interval: 25,
        dev_metric: DevMetric::Accuracy,
        seed,
        curriculum,
        ..TrainConfig::default()
    };
    Ok(train(init_params(&model)?, corpus, Some(dev), &cfg)?.log)
}

fn main() -> token_curriculum::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(5, |s| s.parse().expect("seed count"));
    let all = synth_task(SynthKind::DigitsToWords, 5500, 0, 12, 2024)?;
    let corpus = all.with_pairs(all.pairs[..5000].to_vec());
    let dev = &all.pairs[5000..];
    println!("{:>4} {:>6} {:>12} {:>12} {:>10} {:>10}", "seed", "I", "base@80%", "soft@80%", "base end", "soft end");
    for seed in 1..=seeds {
        let base = run(&corpus, dev, seed, CurriculumConfig::default())?;
        let history: Vec<(usize, f64)> = base.iter().filter_map(|r| r.dev_metric.map(|m| (r.step, m))).collect();
        let total = estimate_curriculum_length(&history, 0.7, MetricDirection::Higher, None)?;
        let soft = run(&corpus, dev, seed, CurriculumConfig::new(Variant::TcSoft).with_steps(total))?;
        let end = |log: &[TrainLogRecord]| log.last().and_then(|r| r.dev_metric).unwrap_or(f64::NAN);
        let at = |log: &[TrainLogRecord]| steps_to_threshold(log, 0.8).map_or("-".into(), |s| s.to_string());
        println!(
            "{seed:>4} {total:>6} {:>12} {:>12} {:>10.4} {:>10.4}",
            at(&base),
            at(&soft),
            end(&base),
            end(&soft)
        );
    }
    Ok(())
}
