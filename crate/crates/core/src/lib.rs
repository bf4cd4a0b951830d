//! Token-wise curriculum learning for small sequence-to-sequence models.
//!
//! The crate trains a tiny attention-based encoder-decoder (or a
//! decoder-only language model) on desk-scale corpora and controls the
//! difficulty of each training step at the token level:
//!
//! * **hard curriculum** masks all but a left-aligned prefix of every target
//!   sentence, and the prefix grows linearly with the update count;
//! * **soft curriculum** keeps every token but weights the loss at position
//!   `t` by `gamma_i ^ alpha(t, len)`, a geometric decay toward the sentence
//!   end that fades out as `gamma_i` grows to 1.
//!
//! Sentence-level baselines (square-root competence over word rarity, and
//! n-gram uncertainty baby steps), their composition with the token-wise
//! schedules, ablation selectors, and the diagnostics used to study them
//! (trigram diversity, positional error rates, BLEU, perplexity) live
//! alongside.
//!
//! Each capability has a runnable program under `examples/`; the `tokcurr`
//! binary wraps the same library calls as subcommands.

pub mod autodiff;
pub mod cli;
pub mod curriculum;
pub mod data;
pub mod decode;
pub mod model;
pub mod train;

mod error;
pub(crate) mod rng;

pub use error::{Error, Result};
