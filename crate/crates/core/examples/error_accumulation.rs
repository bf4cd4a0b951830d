//! Error rate by relative target position for a partly trained copy model:
//! mistakes pile up toward the end of the output.
//!
//! ```text
//! cargo run --release --example error_accumulation
//! ```

use token_curriculum::data::{synth_task, SynthKind, EOS};
use token_curriculum::decode::{decode_corpus, positional_error_rate, spearman, tail_error_rate, LengthFilter};
use token_curriculum::model::{init_params, ModelConfig};
use token_curriculum::train::{train, TrainConfig};

fn main() -> token_curriculum::Result<()> {
    let all = synth_task(SynthKind::Copy, 2300, 20, 12, 31)?;
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
        max_steps: 500,
        batch_tokens: 256,
        ..TrainConfig::default()
    };
    let params = train(params, &corpus, None, &cfg)?.params;

    let sources: Vec<&[usize]> = dev.iter().map(|p| p.source.as_slice()).collect();
    let hyps: Vec<Vec<usize>> = decode_corpus(&params, &sources, 4, 0.6, 13)?
        .into_iter()
        .map(|h| h.into_iter().filter(|&t| t != EOS).collect())
        .collect();
    let refs: Vec<&[usize]> = dev.iter().map(|p| p.target_words()).collect();
    let pe = positional_error_rate(&hyps, &refs, 10)?;
    for (k, r) in pe.rates.iter().enumerate() {
        println!("partition {k}: {r:.3} {}", "#".repeat((r * 60.0) as usize));
    }
    let idx: Vec<f64> = (0..10).map(f64::from).collect();
    println!("spearman(partition, error) = {:.3}", spearman(&idx, &pe.rates)?);
    for f in ["all", "1-6", "7-"] {
        let filter = LengthFilter::parse(f)?;
        println!("tail 25% error, lengths {}: {:.3}", filter.label(), tail_error_rate(&hyps, &refs, 0.25, filter)?);
    }
    Ok(())
}
