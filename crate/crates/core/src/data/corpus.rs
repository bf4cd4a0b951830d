use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::vocab::{Tokenization, Vocab, EOS};
use crate::error::{Error, Result};
use crate::rng::keyed;

/// One training example as token ids. `target` always ends with end-of-sequence.
///
/// Monolingual (language-modeling) corpora leave `source` empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplePair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

impl SamplePair {
    /// Builds a pair, appending end-of-sequence to the target.
    pub fn new(source: Vec<usize>, mut target: Vec<usize>) -> Self {
        target.push(EOS);
        Self { source, target }
    }

    /// Target length including the end-of-sequence token.
    pub fn target_len(&self) -> usize {
        self.target.len()
    }

    /// Target tokens without the trailing end-of-sequence.
    pub fn target_words(&self) -> &[usize] {
        match self.target.last() {
            Some(&EOS) => &self.target[..self.target.len() - 1],
            _ => &self.target,
        }
    }
}

/// Tokenized parallel text before vocabulary construction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawCorpus {
    pub pairs: Vec<(Vec<String>, Vec<String>)>,
    pub tokenization: Tokenization,
}

/// Result of reading a pair of text files.
#[derive(Clone, Debug)]
pub struct LoadReport {
    pub corpus: RawCorpus,
    /// Pairs removed for exceeding the length cap or being empty.
    pub dropped: usize,
}

/// Pairs of id sequences plus the vocabularies that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct ParallelCorpus {
    pub pairs: Vec<SamplePair>,
    pub source_vocab: Vocab,
    pub target_vocab: Vocab,
    pub tokenization: Tokenization,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    if lines.is_empty() {
        return Err(Error::Empty(format!("{} has no lines", path.display())));
    }
    Ok(lines)
}

/// Reads line-aligned source/target files. Pairs where either side is empty
/// or longer than `max_len` tokens are dropped and counted.
pub fn load_parallel_text(source: &Path, target: &Path, max_len: usize, tokenization: Tokenization) -> Result<LoadReport> {
    let src = read_lines(source)?;
    let tgt = read_lines(target)?;
    if src.len() != tgt.len() {
        return Err(Error::LineCountMismatch {
            source_lines: src.len(),
            target_lines: tgt.len(),
        });
    }
    let mut corpus = RawCorpus {
        pairs: Vec::with_capacity(src.len()),
        tokenization,
    };
    let mut dropped = 0;
    for (s, t) in src.iter().zip(&tgt) {
        let (s, t) = (tokenization.tokenize(s), tokenization.tokenize(t));
        if s.is_empty() || t.is_empty() || s.len() > max_len || t.len() > max_len {
            dropped += 1;
        } else {
            corpus.pairs.push((s, t));
        }
    }
    if corpus.pairs.is_empty() {
        return Err(Error::Empty("every pair was dropped".into()));
    }
    Ok(LoadReport { corpus, dropped })
}

/// Reads a monolingual file for language modeling (empty source side).
pub fn load_monolingual_text(path: &Path, max_len: usize, tokenization: Tokenization) -> Result<LoadReport> {
    let lines = read_lines(path)?;
    let mut corpus = RawCorpus {
        pairs: Vec::new(),
        tokenization,
    };
    let mut dropped = 0;
    for line in &lines {
        let t = tokenization.tokenize(line);
        if t.is_empty() || t.len() > max_len {
            dropped += 1;
        } else {
            corpus.pairs.push((Vec::new(), t));
        }
    }
    if corpus.pairs.is_empty() {
        return Err(Error::Empty("every line was dropped".into()));
    }
    Ok(LoadReport { corpus, dropped })
}

impl RawCorpus {
    pub fn source_sentences(&self) -> impl Iterator<Item = &[String]> {
        self.pairs.iter().map(|(s, _)| s.as_slice())
    }

    pub fn target_sentences(&self) -> impl Iterator<Item = &[String]> {
        self.pairs.iter().map(|(_, t)| t.as_slice())
    }

    /// Builds both vocabularies from this corpus and encodes it.
    pub fn into_corpus(self, min_freq: usize) -> ParallelCorpus {
        let source_vocab = Vocab::build(self.source_sentences(), min_freq);
        let target_vocab = Vocab::build(self.target_sentences(), min_freq);
        self.encode_with(&source_vocab, &target_vocab)
    }

    /// Encodes with existing vocabularies (dev/test sets).
    pub fn encode_with(&self, source_vocab: &Vocab, target_vocab: &Vocab) -> ParallelCorpus {
        let pairs = self
            .pairs
            .iter()
            .map(|(s, t)| SamplePair::new(source_vocab.encode(s), target_vocab.encode(t)))
            .collect();
        ParallelCorpus {
            pairs,
            source_vocab: source_vocab.clone(),
            target_vocab: target_vocab.clone(),
            tokenization: self.tokenization,
        }
    }
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_monolingual(&self) -> bool {
        self.pairs.iter().all(|p| p.source.is_empty())
    }

    /// Checks the corpus invariants: ids in range, EOS-terminated non-empty targets.
    pub fn validate(&self) -> Result<()> {
        let mono = self.is_monolingual();
        for (i, p) in self.pairs.iter().enumerate() {
            if p.target.len() < 2 || p.target.last() != Some(&EOS) {
                return Err(Error::invalid(format!("pair {i}: target must be non-empty and end with EOS")));
            }
            if !mono && p.source.is_empty() {
                return Err(Error::invalid(format!("pair {i}: empty source")));
            }
            for &id in &p.source {
                if id >= self.source_vocab.len() {
                    return Err(Error::OutOfVocab {
                        id,
                        vocab: self.source_vocab.len(),
                    });
                }
            }
            for &id in &p.target {
                if id >= self.target_vocab.len() {
                    return Err(Error::OutOfVocab {
                        id,
                        vocab: self.target_vocab.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn with_pairs(&self, pairs: Vec<SamplePair>) -> Self {
        Self {
            pairs,
            source_vocab: self.source_vocab.clone(),
            target_vocab: self.target_vocab.clone(),
            tokenization: self.tokenization,
        }
    }

    /// Uniform sample of `floor(fraction * n)` pairs without replacement,
    /// kept in corpus order.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!("subsample fraction {fraction} not in (0, 1]")));
        }
        let keep = (fraction * self.len() as f64 + 1e-9).floor() as usize;
        if keep == 0 {
            return Err(Error::Empty(format!("subsample of {} pairs at {fraction} is empty", self.len())));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut keyed(seed, &[0x5AB5]));
        let mut chosen = order[..keep].to_vec();
        chosen.sort_unstable();
        Ok(self.with_pairs(chosen.into_iter().map(|i| self.pairs[i].clone()).collect()))
    }

    /// SHA-256 over vocabularies and pair ids, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for vocab in [&self.source_vocab, &self.target_vocab] {
            for t in vocab.tokens() {
                h.update(t.as_bytes());
                h.update([0u8]);
            }
            h.update([1u8]);
        }
        for p in &self.pairs {
            for seq in [&p.source, &p.target] {
                for &id in seq.iter() {
                    h.update((id as u64).to_le_bytes());
                }
                h.update(u64::MAX.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Source and target lines as text.
    pub fn to_lines(&self) -> (Vec<String>, Vec<String>) {
        let tok = self.tokenization;
        self.pairs
            .iter()
            .map(|p| {
                (
                    tok.detokenize(&self.source_vocab.decode(&p.source)),
                    tok.detokenize(&self.target_vocab.decode(&p.target)),
                )
            })
            .unzip()
    }

    /// Writes the corpus as two line-aligned text files.
    pub fn write_text(&self, source: &Path, target: &Path) -> Result<()> {
        let (src, tgt) = self.to_lines();
        fs::write(source, src.join("\n") + "\n").map_err(|e| Error::io(source, e))?;
        fs::write(target, tgt.join("\n") + "\n").map_err(|e| Error::io(target, e))?;
        Ok(())
    }
}
