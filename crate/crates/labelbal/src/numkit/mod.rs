//! Numeric foundations: dense matrices, stable loss primitives, seeded
//! random streams, and the finite-difference gradient checker.

pub mod affine;
pub mod check;
pub mod loss;
pub mod matrix;
pub mod rng;

pub use affine::{affine_forward_backward, Affine};
pub use check::finite_diff_check;
pub use loss::{bce_with_logits, bce_with_logits_grad, indicator, sigmoid, softplus};
pub use matrix::{axpy, cosine_similarity, dot, norm, sub, Matrix};
pub use rng::{RngStream, StreamId};
