//! Affine layer primitive with exact analytic forward/backward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::matrix::Matrix;
use crate::numkit::rng::RngStream;

/// One affine map `x -> W x + b`. Also used as a same-shaped gradient holder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Affine {
            w: Matrix::zeros(out_dim, in_dim),
            b: vec![0.0; out_dim],
        }
    }

    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    pub fn he_uniform(out_dim: usize, in_dim: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        Affine {
            w: Matrix::from_fn(out_dim, in_dim, |_, _| rng.uniform_symmetric(limit)),
            b: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.w.matvec(x);
        for (o, b) in out.iter_mut().zip(&self.b) {
            *o += b;
        }
        out
    }

    /// `self += scale * grad` on both weights and bias.
    pub fn add_scaled(&mut self, grad: &Affine, scale: f64) {
        self.w.add_scaled(&grad.w, scale);
        for (b, g) in self.b.iter_mut().zip(&grad.b) {
            *b += scale * g;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.w.all_finite() && self.b.iter().all(|v| v.is_finite())
    }
}

/// Forward pass `out = W x + b` plus exact gradients against an upstream
/// cotangent: `gradW = upstream x^T`, `gradb = upstream`, `gradx = W^T upstream`.
#[allow(clippy::type_complexity)]
pub fn affine_forward_backward(
    w: &Matrix,
    b: &[f64],
    x: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, Matrix, Vec<f64>, Vec<f64>)> {
    if b.len() != w.rows() || x.len() != w.cols() || upstream.len() != w.rows() {
        return Err(Error::Dim(format!(
            "affine shapes: W {}x{}, b {}, x {}, upstream {}",
            w.rows(),
            w.cols(),
            b.len(),
            x.len(),
            upstream.len()
        )));
    }
    let mut out = w.matvec(x);
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    let mut grad_w = Matrix::zeros(w.rows(), w.cols());
    grad_w.add_outer(upstream, x, 1.0);
    let grad_b = upstream.to_vec();
    let grad_x = w.matvec_t(upstream);
    Ok((out, grad_w, grad_b, grad_x))
}
