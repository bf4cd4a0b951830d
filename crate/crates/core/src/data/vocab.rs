use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// How raw lines are split into tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenization {
    #[default]
    Word,
    Char,
}

impl Tokenization {
    pub fn tokenize(self, line: &str) -> Vec<String> {
        match self {
            Tokenization::Word => line.split_whitespace().map(str::to_string).collect(),
            Tokenization::Char => line.chars().map(String::from).collect(),
        }
    }

    pub fn detokenize<S: AsRef<str>>(self, tokens: &[S]) -> String {
        let parts = tokens.iter().map(AsRef::as_ref);
        match self {
            Tokenization::Word => parts.collect::<Vec<_>>().join(" "),
            Tokenization::Char => parts.collect(),
        }
    }
}

/// Bidirectional token/id map with four reserved ids (pad, bos, eos, unk).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(repr: VocabRepr) -> Self {
        let index = repr.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab {
            tokens: repr.tokens,
            index,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr { tokens: v.tokens }
    }
}

impl Vocab {
    /// Specials followed by `tokens` in the given order (duplicates skipped).
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in SPECIALS.iter().map(|s| s.to_string()).chain(tokens.into_iter().map(Into::into)) {
            if !vocab.index.contains_key(&t) {
                vocab.index.insert(t.clone(), vocab.tokens.len());
                vocab.tokens.push(t);
            }
        }
        vocab
    }

    /// Vocabulary of tokens seen at least `min_freq` times, most frequent
    /// first and lexicographic among equal counts.
    pub fn build<'a, I>(sentences: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sentence in sentences {
            for tok in sentence {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq.max(1)).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK`] when absent.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Token strings for `ids`, stopping at end-of-sequence and skipping
    /// padding and begin-of-sequence markers.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| id != PAD && id != BOS)
            .map(|&id| self.token(id).unwrap_or(SPECIALS[UNK]).to_string())
            .collect()
    }
}
