//! Matrices, automatic differentiation, and optimization.

pub mod adam;
pub mod matrix;
pub mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use matrix::{dropout, layer_norm, matmul, softmax_rows, Matrix, Mode};
pub use tape::{Gradients, NodeId, Tape};
