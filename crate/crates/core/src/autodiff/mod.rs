//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! The operation set is the closure needed by the sequence model and its
//! weighted loss: elementwise arithmetic, matrix products, embedding lookup,
//! (log-)softmax, pointwise nonlinearities, concatenation/slicing, and
//! masked reductions.

mod gradcheck;
mod graph;
mod ops;
mod tensor;

pub use gradcheck::{check_gradients, check_gradients_with, relative_error, GradCheck, Stencil};
pub use graph::{Gradients, Graph, NodeId};
pub use tensor::Tensor;
