//! Tiny GRU encoder-decoder with dot-product attention, plus a
//! decoder-only mode for language modeling.
//!
//! The decoder starts from a zero state, feeds the previous target token,
//! attends over the encoder states with the top-layer state as query, and
//! predicts from `tanh(W [h; context] + b)`.

mod checkpoint;
mod config;
mod infer;
mod loss;
mod net;
mod params;

pub use checkpoint::{file_hash, Checkpoint, CheckpointHeader, CHECKPOINT_VERSION};
pub use config::{ModelConfig, ModelMode};
pub use infer::{encode, greedy_decode_batch, token_log_probs, Decoder, EncoderStates};
pub use loss::{loss_and_gradients, weighted_loss_graph, weighted_teacher_forcing_loss, LossNodes, LossReport};
pub use params::{init_params, ModelParams};
