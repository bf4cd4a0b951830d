//! Per-position loss weights of the token-wise curricula over training.
//!
//! ```text
//! cargo run --example schedule_weights
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use token_curriculum::curriculum::{CurriculumConfig, Variant};

fn main() -> token_curriculum::Result<()> {
    let len = 10;
    let total = 8000;
    for variant in [Variant::TcHard, Variant::TcSoft, Variant::AblationRandom, Variant::AblationRange] {
        let cfg = CurriculumConfig::new(variant).with_steps(total);
        println!("{variant} (target length {len}, I = {total})");
        for i in (0..=total).step_by(total / 4) {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            let w = cfg.token_weights(len, i, Some(&mut rng), None)?;
            let cells: Vec<String> = w.weights().iter().map(|v| format!("{v:7.4}")).collect();
            println!("  i={i:5} {}", cells.join(" "));
        }
    }
    Ok(())
}
