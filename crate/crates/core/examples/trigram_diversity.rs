//! Cumulative unique trigrams each curriculum exposes during its first
//! quarter, on a synthetic translation corpus.
//!
//! ```text
//! cargo run --release --example trigram_diversity
//! ```

use token_curriculum::curriculum::{CurriculumConfig, Variant};
use token_curriculum::data::{synth_task, SynthKind};
use token_curriculum::decode::diversity_curve;

fn main() -> token_curriculum::Result<()> {
    let corpus = synth_task(SynthKind::Reverse, 1000, 30, 15, 3)?;
    let total = 400;
    let horizon = total / 4;
    println!("{:<16} {:>8} {:>8} {:>8} {:>8}", "method", "i=1", "i=25", "i=50", "i=100");
    for v in [Variant::None, Variant::TcHard, Variant::TcSoft, Variant::AblationRandom, Variant::ScRsqrt, Variant::ScUnc] {
        let cfg = CurriculumConfig::new(v).with_steps(total);
        let curve = diversity_curve(&cfg, &corpus.pairs, horizon, 1)?;
        println!("{:<16} {:>8} {:>8} {:>8} {:>8}", v.as_str(), curve[0], curve[24], curve[49], curve[99]);
    }
    Ok(())
}
