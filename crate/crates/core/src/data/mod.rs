//! Corpora, vocabularies, token-budget batching and synthetic tasks.

mod batch;
mod corpus;
mod synth;
mod vocab;

pub use batch::{batch_by_tokens, batch_indices, Batch};
pub use corpus::{load_monolingual_text, load_parallel_text, LoadReport, ParallelCorpus, RawCorpus, SamplePair};
pub use synth::{digits_to_words, synth_task, SynthKind};
pub use vocab::{Tokenization, Vocab, BOS, EOS, PAD, UNK};
