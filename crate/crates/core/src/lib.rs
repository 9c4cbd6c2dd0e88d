//! Numerical laboratory for the edge-of-stability behaviour of weight-perturbed
//! (variational) gradient descent.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: counter-based random streams, samplers, a dense Jacobi
//!   eigensolver and compensated summation.
//! * [`stability`]: the Variational Factor, per-mode thresholds, exact
//!   expected one-step loss change on quadratics and Monte-Carlo descent
//!   probabilities.
//! * [`quadlab`]: trajectory, heatmap, boundary, histogram and smoothing
//!   experiments on one-dimensional and low-dimensional toy losses.
//! * [`models`]: a small tanh MLP with exact gradient and Hessian-vector
//!   product oracles plus dataset handling.
//! * [`optimizers`]: GD, variational GD, Adam, VON and IVON-style updates and
//!   the variational objective.
//! * [`diagnostics`]: Lanczos sharpness estimation, threshold tracking and
//!   JSONL trajectory recording.
//! * [`training`]: the measured training loop shared by the CLI experiments.
//! * [`cli`]: declarative experiment configuration and artifact output.

// `!(x > 0.0)` is the NaN-rejecting form used throughout argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod numerics;
pub mod optimizers;
pub mod quadlab;
pub mod stability;
pub mod training;

pub use error::{Error, Result};

/// Anything that can report a loss, its gradient and Hessian-vector products
/// at a flat parameter vector.
///
/// Optimizers and diagnostics are written against this trait so the same code
/// runs on analytic quadratics, toy landscapes and the MLP.
pub trait Objective {
    fn dim(&self) -> usize;

    fn loss(&self, params: &[f64]) -> f64;

    fn gradient(&self, params: &[f64]) -> Vec<f64>;

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        (self.loss(params), self.gradient(params))
    }

    fn hvp(&self, params: &[f64], direction: &[f64]) -> Vec<f64>;
}
