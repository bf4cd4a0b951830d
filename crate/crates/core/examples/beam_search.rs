//! Beam search over an explicit probability table, showing how the length
//! penalty trades a short likely output for a longer one.
//!
//! ```text
//! cargo run --example beam_search
//! ```

use token_curriculum::data::EOS;
use token_curriculum::decode::{beam_search, greedy, TableModel};

fn main() -> token_curriculum::Result<()> {
    // tokens: 0 and 1 are ordinary symbols here, 2 ends the sequence
    let mut m = TableModel::new(4, vec![0.1, 0.1, 0.7, 0.1])?;
    m.set(vec![], vec![0.55, 0.0, 0.45, 0.0])?;
    m.set(vec![0], vec![0.0, 0.6, 0.1, 0.3])?;
    m.set(vec![0, 1], vec![0.0, 0.0, 0.95, 0.05])?;
    m.set(vec![0, 3], vec![0.0, 0.0, 0.9, 0.1])?;

    let g = greedy(&m, 6)?;
    println!("greedy: {:?} logprob {:.4}", g.tokens, g.logprob);
    for alpha in [0.0, 0.6, 1.0, 2.0] {
        let out = beam_search(&m, 4, alpha, 6)?;
        println!("beam 4, alpha {alpha}: best {:?} score {:.4}", out.best.tokens, out.best.score);
        for h in out.n_best.iter().skip(1).take(2) {
            println!("    also {:?} score {:.4}", h.tokens, h.score);
        }
    }
    assert_eq!(g.tokens.last(), Some(&EOS));
    Ok(())
}
