use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{ParallelCorpus, SamplePair};
use super::vocab::{Tokenization, Vocab};
use crate::error::{Error, Result};
use crate::rng::keyed;

const DIGIT_WORDS: [&str; 10] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

/// Desk-scale synthetic tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Target equals the source.
    Copy,
    /// Target is the source reversed.
    Reverse,
    /// Source is a digit string, target spells each digit as a word.
    DigitsToWords,
    /// Monolingual arithmetic progressions modulo the vocabulary size, for
    /// language modeling.
    Progression,
}

/// Word form of a digit sequence.
pub fn digits_to_words(digits: &[u8]) -> Vec<&'static str> {
    digits.iter().map(|&d| DIGIT_WORDS[d as usize]).collect()
}

fn symbols(vocab_size: usize) -> Vec<String> {
    (0..vocab_size).map(|k| format!("s{k}")).collect()
}

/// Generates `n` pairs with lengths uniform in `1..=max_len` (at least 2
/// for progressions). Symbol `k` of the content vocabulary has id `4 + k`.
pub fn synth_task(kind: SynthKind, n: usize, vocab_size: usize, max_len: usize, seed: u64) -> Result<ParallelCorpus> {
    if n == 0 || max_len == 0 {
        return Err(Error::invalid("synthetic task needs n >= 1 and max_len >= 1"));
    }
    if kind != SynthKind::DigitsToWords && vocab_size == 0 {
        return Err(Error::invalid("synthetic task needs a nonempty vocabulary"));
    }
    let (source_vocab, target_vocab) = match kind {
        SynthKind::DigitsToWords => (
            Vocab::from_tokens((0..10).map(|d| d.to_string())),
            Vocab::from_tokens(DIGIT_WORDS),
        ),
        SynthKind::Progression => (Vocab::from_tokens(Vec::<String>::new()), Vocab::from_tokens(symbols(vocab_size))),
        _ => {
            let v = Vocab::from_tokens(symbols(vocab_size));
            (v.clone(), v)
        }
    };
    let mut rng = keyed(seed, &[kind as u64]);
    let pairs = (0..n)
        .map(|_| match kind {
            SynthKind::Copy | SynthKind::Reverse => {
                let len = rng.gen_range(1..=max_len);
                let src: Vec<usize> = (0..len).map(|_| 4 + rng.gen_range(0..vocab_size)).collect();
                let mut tgt = src.clone();
                if kind == SynthKind::Reverse {
                    tgt.reverse();
                }
                SamplePair::new(src, tgt)
            }
            SynthKind::DigitsToWords => {
                let len = rng.gen_range(1..=max_len);
                let digits: Vec<u8> = (0..len).map(|_| rng.gen_range(0..10)).collect();
                let src = digits.iter().map(|&d| 4 + d as usize).collect();
                let tgt = digits.iter().map(|&d| 4 + d as usize).collect();
                SamplePair::new(src, tgt)
            }
            SynthKind::Progression => {
                let len = rng.gen_range(2.min(max_len)..=max_len);
                let start = rng.gen_range(0..vocab_size);
                let stride = rng.gen_range(1..=3usize);
                let tgt = (0..len).map(|k| 4 + (start + k * stride) % vocab_size).collect();
                SamplePair::new(Vec::new(), tgt)
            }
        })
        .collect();
    Ok(ParallelCorpus {
        pairs,
        source_vocab,
        target_vocab,
        tokenization: Tokenization::Word,
    })
}
