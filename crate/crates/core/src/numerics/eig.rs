use ndarray::{Array1, Array2};

use crate::{Error, Result};

/// Eigen-decomposition of a symmetric matrix: eigenvalues in descending order
/// and the matching orthonormal eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl SymmetricEigen {
    /// `V diag(values) V^T`
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values.view().insert_axis(ndarray::Axis(0));
        scaled.dot(&self.vectors.t())
    }
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
///
/// Rotations are applied until the off-diagonal Frobenius mass falls below
/// `eps * ||A||_F`. Intended for `d <= 512`.
pub fn symmetric_eig(matrix: &Array2<f64>) -> Result<SymmetricEigen> {
    let (n, cols) = matrix.dim();
    if n != cols {
        return Err(Error::contract(format!("matrix is {n}x{cols}, expected square")));
    }
    if n == 0 {
        return Err(Error::contract("matrix is empty"));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("matrix contains non-finite entries"));
    }
    let scale = matrix.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (matrix[[i, j]] - matrix[[j, i]]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::contract(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    matrix[[i, j]],
                    matrix[[j, i]]
                )));
            }
        }
    }

    // Work on the symmetrised copy so round-off asymmetry cannot accumulate.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = f64::EPSILON * total;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if (2.0 * off).sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                if s == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = Array1::from_iter(order.iter().map(|&i| a[i * n + i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = v[row * n + src];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}
