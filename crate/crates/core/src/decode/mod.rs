//! Decoding and evaluation: beam search, BLEU, perplexity, trigram
//! diversity and positional error analysis.

mod beam;
mod bleu;
mod corpus;
mod diversity;
mod metrics;

pub use beam::{beam_search, greedy, length_penalty, BeamOutput, Hypothesis, StepModel, TableModel};
pub use bleu::{bleu, bleu_stats, BleuStats};
pub use corpus::decode_corpus;
pub use diversity::{consumed_target_mask, diversity_curve, sentence_schedule, unique_trigram_count, DiversityCounter, Side};
pub use metrics::{
    partition_of, perplexity, perplexity_from_log_probs, positional_error_rate, spearman, tail_error_rate, target_log_probs, token_accuracy,
    LengthFilter, PositionalErrors,
};
