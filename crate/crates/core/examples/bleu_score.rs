//! Corpus BLEU with clipped n-gram precisions and the brevity penalty.
//!
//! ```text
//! cargo run --example bleu_score
//! ```

use token_curriculum::decode::{bleu, bleu_stats};

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn main() -> token_curriculum::Result<()> {
    let hyps = [words("the cat sat on the mat"), words("the the the cat"), words("a quick brown fox")];
    let refs = [words("the cat is on the mat"), words("the cat sat here"), words("a quick brown fox jumps")];
    for (h, r) in hyps.iter().zip(&refs) {
        let st = bleu_stats(std::slice::from_ref(h), std::slice::from_ref(r), 4)?;
        println!(
            "{:<26} | {:<26} matches {:?} of {:?}  BLEU {:.2} (smoothed {:.2})",
            h.join(" "),
            r.join(" "),
            st.matches,
            st.totals,
            st.score(false),
            st.score(true)
        );
    }
    println!("corpus BLEU {:.2}", bleu(&hyps, &refs, 4, false)?);
    Ok(())
}
