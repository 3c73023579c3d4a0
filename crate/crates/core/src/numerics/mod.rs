//! Dense matrices, reverse-mode differentiation, and seeded sampling.

mod gradcheck;
mod graph;
mod matrix;
mod rng;

pub use gradcheck::{finite_diff_check, ParameterSet};
pub use graph::{DiffNode, NodeId, Tape};
pub use matrix::Matrix;
pub use rng::Rng;

#[cfg(test)]
mod graph_tests;
