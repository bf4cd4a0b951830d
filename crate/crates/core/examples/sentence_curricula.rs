//! Sentence-level baselines: rarity with square-root competence, n-gram
//! uncertainty with baby steps, and their composition with the soft
//! token-wise schedule.
//!
//! ```text
//! cargo run --release --example sentence_curricula
//! ```

use token_curriculum::curriculum::{
    compose_tc_sc, rarity_difficulty, sc_uncertainty_baby_steps, CurriculumConfig, SentenceSchedule, Variant,
};
use token_curriculum::data::{synth_task, SynthKind};

fn main() -> token_curriculum::Result<()> {
    let corpus = synth_task(SynthKind::DigitsToWords, 2000, 0, 12, 5)?;
    let total = 1000;

    let rarity = rarity_difficulty(&corpus.pairs);
    let rsqrt = SentenceSchedule::rsqrt(&rarity, total, 0.01)?;
    let unc = sc_uncertainty_baby_steps(&corpus.pairs, 4, total)?;
    println!("{:>6} {:>10} {:>10}", "step", "sc-rsqrt", "sc-unc");
    for i in (0..=total).step_by(125) {
        println!("{i:>6} {:>10} {:>10}", rsqrt.available(i), unc.available(i));
    }
    let easiest = &corpus.pairs[rsqrt.order()[0]];
    let hardest = &corpus.pairs[*rsqrt.order().last().unwrap()];
    println!("easiest by rarity: {:?}", corpus.source_vocab.decode(&easiest.source));
    println!("hardest by rarity: {:?}", corpus.source_vocab.decode(&hardest.source));

    let token = CurriculumConfig::new(Variant::TcSoftSc).with_steps(total);
    let step = 200;
    let batch = compose_tc_sc(unc.selected(step), &corpus.pairs, &token, step)?;
    let (i, w) = &batch[0];
    println!(
        "step {step}: {} sentences released; first one has {} target tokens weighted {:.3?}",
        batch.len(),
        corpus.pairs[*i].target.len(),
        w.weights()
    );
    Ok(())
}
