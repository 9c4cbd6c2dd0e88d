//! Deterministic random streams, samplers, dense symmetric eigensolver and
//! compensated reductions.

mod eig;
mod rng;
mod sampling;
mod sum;

pub use eig::{symmetric_eig, SymmetricEigen};
pub use rng::{RandomStream, StreamRng};
pub use sampling::{sample_gaussian_diag, sample_student_t, DiagGaussian, StudentT};
pub use sum::{stable_mean, stable_sum, NeumaierSum};

/// Euclidean dot product with fixed left-to-right order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
