use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::{dot, symmetric_eig};
use crate::{Error, Objective, Result};

/// Positive-definite quadratic `l(m) = 1/2 m^T Q m` stored through its
/// eigen-decomposition `Q = sum_i lambda_i v_i v_i^T`.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    eigenvectors: Array2<f64>,
    matrix: Array2<f64>,
}

impl QuadraticProblem {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: Array2<f64>) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 {
            return Err(Error::contract("quadratic needs at least one mode"));
        }
        if eigenvectors.dim() != (d, d) {
            return Err(Error::contract(format!(
                "eigenvector basis is {:?}, expected {d}x{d}",
                eigenvectors.dim()
            )));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::contract("eigenvalues must be finite and strictly positive"));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::contract("eigenvalues must be sorted in descending order"));
        }
        let gram = eigenvectors.t().dot(&eigenvectors) - Array2::<f64>::eye(d);
        let err = gram.iter().map(|x| x * x).sum::<f64>().sqrt();
        if err >= 1e-9 {
            return Err(Error::contract(format!("eigenvectors are not orthonormal (||V^T V - I|| = {err:e})")));
        }
        let lam = Array1::from(eigenvalues.clone());
        let matrix = (&eigenvectors * &lam.view().insert_axis(ndarray::Axis(0))).dot(&eigenvectors.t());
        let matrix = 0.5 * (&matrix + &matrix.t());
        Ok(Self {
            eigenvalues,
            eigenvectors,
            matrix,
        })
    }

    /// Axis-aligned quadratic; eigenvalues are sorted internally.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        let d = eigenvalues.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let mut vectors = Array2::zeros((d, d));
        for (col, &axis) in order.iter().enumerate() {
            vectors[[axis, col]] = 1.0;
        }
        Self::new(order.iter().map(|&i| eigenvalues[i]).collect(), vectors)
    }

    pub fn scalar(lambda: f64) -> Result<Self> {
        Self::diagonal(&[lambda])
    }

    pub fn from_matrix(q: &Array2<f64>) -> Result<Self> {
        let eig = symmetric_eig(q)?;
        Self::new(eig.values.to_vec(), eig.vectors)
    }

    /// Random rotation of the given spectrum (Gram-Schmidt on a Gaussian
    /// matrix).
    pub fn random_rotation<R: Rng + ?Sized>(eigenvalues: &[f64], rng: &mut R) -> Result<Self> {
        let d = eigenvalues.len();
        let mut sorted = eigenvalues.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
        while basis.len() < d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&v, b);
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= c * bi;
                    }
                }
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-8 {
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v);
            }
        }
        let mut vectors = Array2::zeros((d, d));
        for (col, b) in basis.iter().enumerate() {
            for (row, &x) in b.iter().enumerate() {
                vectors[[row, col]] = x;
            }
        }
        Self::new(sorted, vectors)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn mode(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i).to_vec()
    }

    /// Coordinates of `m` in the eigenbasis, `v_i^T m`.
    pub fn project(&self, m: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.eigenvectors.column(i).iter().zip(m).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Diagonal of `Q^3` in parameter coordinates.
    pub fn cube_diagonal(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|j| {
                (0..d)
                    .map(|i| self.eigenvalues[i].powi(3) * self.eigenvectors[[j, i]].powi(2))
                    .sum()
            })
            .collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        self.matrix.diag().to_vec()
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn loss(&self, params: &[f64]) -> f64 {
        0.5 * dot(params, &self.apply(params))
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.apply(params)
    }

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let g = self.apply(params);
        (0.5 * dot(params, &g), g)
    }

    fn hvp(&self, _params: &[f64], direction: &[f64]) -> Vec<f64> {
        self.apply(direction)
    }
}
