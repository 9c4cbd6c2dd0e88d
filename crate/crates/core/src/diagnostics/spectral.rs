use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numerics::{axpy, dot, norm, symmetric_eig, RandomStream, StreamRng};
use crate::{Error, Objective, Result};

/// Largest `k` accepted by [`top_eigen`].
pub const MAX_K: usize = 16;

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Ritz values are recomputed every this many Lanczos steps.
const CHECK_EVERY: usize = 4;

/// Leading eigenpairs of a symmetric operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `||H v - lambda v||` for each pair, from an explicit product.
    pub residuals: Vec<f64>,
    /// Lanczos steps taken (one operator application each).
    pub iterations: usize,
    /// Every residual is within `tol * max(1, |lambda|)`.
    pub converged: bool,
}

impl SpectralResult {
    pub fn sharpness(&self) -> f64 {
        self.values[0]
    }
}

fn random_unit(dim: usize, basis: &[Vec<f64>], rng: &mut StreamRng) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n0 = norm(&v);
        orthogonalize(&mut v, basis);
        let n = norm(&v);
        if n > 1e-8 * n0 {
            v.iter_mut().for_each(|x| *x /= n);
            return Some(v);
        }
    }
    None
}

/// Classical Gram-Schmidt applied twice.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(w, q);
            axpy(-c, q, w);
        }
    }
}

struct Ritz {
    values: Vec<f64>,
    /// Columns of the tridiagonal eigenvector matrix, top `k` only.
    coords: Vec<Vec<f64>>,
    estimates: Vec<f64>,
}

fn ritz(alpha: &[f64], beta: &[f64], last_beta: f64, k: usize) -> Result<Ritz> {
    let m = alpha.len();
    let mut t = Array2::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alpha[i];
        if i + 1 < m {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let eig = symmetric_eig(&t)?;
    let k = k.min(m);
    let coords: Vec<Vec<f64>> = (0..k).map(|i| eig.vectors.column(i).to_vec()).collect();
    let estimates = coords.iter().map(|s| (last_beta * s[m - 1]).abs()).collect();
    Ok(Ritz {
        values: eig.values.iter().take(k).copied().collect(),
        coords,
        estimates,
    })
}

fn check_output(w: &[f64], step: usize) -> Result<()> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "Hessian-vector product".into(),
            sample: step,
        });
    }
    Ok(())
}

/// The `k` algebraically largest eigenpairs of the symmetric operator `op`
/// on `R^dim`, by Lanczos with full reorthogonalisation.
///
/// The start vector is Gaussian from `stream`. When the Krylov space becomes
/// invariant the iteration restarts from a fresh random vector orthogonal to
/// everything seen so far, so repeated eigenvalues are found too. Indefinite
/// operators need no shift. Runs at most `max_iters` steps (capped at `dim`);
/// a result whose residuals miss the tolerance is returned with
/// `converged = false`.
pub fn top_eigen<F>(mut op: F, dim: usize, k: usize, max_iters: usize, tol: f64, stream: &RandomStream) -> Result<SpectralResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return Err(Error::spec("operator dimension must be positive"));
    }
    if k == 0 || k > dim.min(MAX_K) {
        return Err(Error::spec(format!("k must lie in 1..={}, got {k}", dim.min(MAX_K))));
    }
    if max_iters < k {
        return Err(Error::spec(format!("max_iters ({max_iters}) is smaller than k ({k})")));
    }
    if !(tol > 0.0) {
        return Err(Error::spec(format!("tolerance must be positive, got {tol}")));
    }
    let m_max = max_iters.min(dim);
    let mut rng = stream.rng();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut scale: f64 = 0.0;
    let mut q = random_unit(dim, &basis, &mut rng).expect("first vector in an empty basis");
    let mut just_restarted = false;

    loop {
        let j = basis.len();
        let mut w = op(&q);
        if w.len() != dim {
            return Err(Error::contract(format!("operator returned length {}, expected {dim}", w.len())));
        }
        check_output(&w, j)?;
        let a = dot(&w, &q);
        basis.push(q);
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        scale = scale.max(a.abs() + b);
        let steps = j + 1;
        let exhausted = steps == m_max;
        let invariant = b <= 1e-12 * scale;

        if steps >= k && !just_restarted && !invariant && (exhausted || (steps - k).is_multiple_of(CHECK_EVERY)) {
            let r = ritz(&alpha, &beta, b, k)?;
            let done = r.values.len() == k
                && r.estimates.iter().zip(&r.values).all(|(e, v)| *e <= 0.1 * tol * v.abs().max(1.0));
            if done {
                break;
            }
        }
        if exhausted {
            break;
        }
        if invariant {
            match random_unit(dim, &basis, &mut rng) {
                Some(v) => {
                    beta.push(0.0);
                    q = v;
                    just_restarted = true;
                }
                None => break,
            }
        } else {
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            q = w;
            just_restarted = false;
        }
    }

    let iterations = basis.len();
    let r = ritz(&alpha, &beta, 0.0, k)?;
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (theta, s) in r.values.iter().zip(&r.coords) {
        let mut v = vec![0.0; dim];
        for (c, qj) in s.iter().zip(&basis) {
            axpy(*c, qj, &mut v);
        }
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        let mut hv = op(&v);
        check_output(&hv, iterations)?;
        axpy(-theta, &v, &mut hv);
        values.push(*theta);
        residuals.push(norm(&hv));
        vectors.push(v);
    }
    let converged = values.len() == k && residuals.iter().zip(&values).all(|(r, v)| *r <= tol * v.abs().max(1.0));
    Ok(SpectralResult {
        values,
        vectors,
        residuals,
        iterations,
        converged,
    })
}

/// Top-`k` Hessian eigenpairs of `objective` at `params`.
pub fn hessian_top_eigen<O: Objective + ?Sized>(
    objective: &O,
    params: &[f64],
    k: usize,
    max_iters: usize,
    tol: f64,
    stream: &RandomStream,
) -> Result<SpectralResult> {
    top_eigen(|v| objective.hvp(params, v), params.len(), k, max_iters, tol, stream)
}

/// Top-`k` eigenpairs of `P^{-1/2} H P^{-1/2}`, which has the spectrum of
/// `P^{-1} H`. Eigenvectors are in the scaled coordinates.
pub fn preconditioned_top_eigen<F>(
    mut hvp: F,
    precond: &[f64],
    k: usize,
    max_iters: usize,
    tol: f64,
    stream: &RandomStream,
) -> Result<SpectralResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if let Some(i) = precond.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::Domain(format!("preconditioner entry {i} is {}, must be positive", precond[i])));
    }
    let s: Vec<f64> = precond.iter().map(|p| 1.0 / p.sqrt()).collect();
    let op = |v: &[f64]| {
        let scaled: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a * b).collect();
        let mut hv = hvp(&scaled);
        hv.iter_mut().zip(&s).for_each(|(a, b)| *a *= b);
        hv
    };
    top_eigen(op, precond.len(), k, max_iters, tol, stream)
}

/// Largest eigenvalue of `P^{-1} H`.
pub fn preconditioned_sharpness<F>(hvp: F, precond: &[f64], max_iters: usize, tol: f64, stream: &RandomStream) -> Result<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    Ok(preconditioned_top_eigen(hvp, precond, 1, max_iters, tol, stream)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::QuadraticProblem;
    use ndarray::Array1;

    fn dense_op(a: &Array2<f64>) -> impl FnMut(&[f64]) -> Vec<f64> + '_ {
        move |v| a.dot(&Array1::from(v.to_vec())).to_vec()
    }

    fn random_symmetric(spectrum: &[f64], seed: u64) -> Array2<f64> {
        QuadraticProblem::random_rotation(spectrum, &mut RandomStream::new(seed).rng())
            .unwrap()
            .matrix()
            .clone()
    }

    #[test]
    fn diagonal_quadratic_in_order() {
        let q = QuadraticProblem::diagonal(&[3.0, 1.0, 0.5]).unwrap();
        let r = hessian_top_eigen(&q, &[0.0; 3], 3, 10, 1e-10, &RandomStream::new(1)).unwrap();
        assert!(r.converged);
        for (v, e) in r.values.iter().zip([3.0, 1.0, 0.5]) {
            assert!((v - e).abs() < 1e-12, "{:?}", r.values);
        }
    }

    #[test]
    fn matches_dense_solver_on_spd() {
        let d = 64;
        for seed in 0..5 {
            let mut rng = RandomStream::new(100 + seed).rng();
            let spectrum: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..10.0)).collect();
            let a = random_symmetric(&spectrum, seed);
            let dense = symmetric_eig(&a).unwrap();
            let r = top_eigen(dense_op(&a), d, 3, 200, 1e-10, &RandomStream::new(seed)).unwrap();
            assert!(r.converged, "{r:?}");
            for i in 0..3 {
                let e = dense.values[i];
                assert!((r.values[i] - e).abs() <= 1e-8 * e.abs(), "{} vs {e}", r.values[i]);
                assert!(r.residuals[i] <= 1e-10 * e.abs().max(1.0));
            }
            for i in 0..3 {
                for j in 0..i {
                    assert!(dot(&r.vectors[i], &r.vectors[j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn indefinite_operator() {
        let d = 20;
        let mut spectrum: Vec<f64> = (0..d).map(|i| 2.0 - 0.3 * i as f64).collect();
        spectrum[d - 1] = -9.0;
        let a = random_symmetric(&spectrum.iter().map(|v| v + 10.0).collect::<Vec<_>>(), 3) - Array2::<f64>::eye(d) * 10.0;
        let dense = symmetric_eig(&a).unwrap();
        let r = top_eigen(dense_op(&a), d, 2, 40, 1e-10, &RandomStream::new(4)).unwrap();
        assert!(r.converged);
        assert!((r.values[0] - dense.values[0]).abs() < 1e-9 && (r.values[1] - dense.values[1]).abs() < 1e-9);

        // All eigenvalues negative: the least negative one is the top.
        let neg = -(random_symmetric(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], 5));
        let r = top_eigen(dense_op(&neg), 10, 1, 10, 1e-10, &RandomStream::new(6)).unwrap();
        assert!((r.values[0] + 1.0).abs() < 1e-9, "{:?}", r.values);
    }

    #[test]
    fn repeated_eigenvalues_found_after_restart() {
        let q = QuadraticProblem::diagonal(&[2.0, 2.0, 2.0, 1.0, 1.0]).unwrap();
        let r = hessian_top_eigen(&q, &[0.0; 5], 4, 5, 1e-10, &RandomStream::new(7)).unwrap();
        assert!(r.converged);
        let expect = [2.0, 2.0, 2.0, 1.0];
        for (v, e) in r.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "{:?}", r.values);
        }
    }

    #[test]
    fn zero_operator() {
        let r = top_eigen(|v| vec![0.0; v.len()], 6, 2, 6, 1e-8, &RandomStream::new(0)).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
        assert!(r.converged);
    }

    #[test]
    fn too_few_iterations_flagged() {
        let d = 50;
        let spectrum: Vec<f64> = (0..d).map(|i| 1.0 + 0.001 * i as f64).collect();
        let a = random_symmetric(&spectrum, 8);
        let r = top_eigen(dense_op(&a), d, 1, 3, 1e-12, &RandomStream::new(9)).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn argument_checks() {
        let op = |v: &[f64]| v.to_vec();
        assert!(top_eigen(op, 4, 5, 10, 1e-6, &RandomStream::new(0)).is_err());
        assert!(top_eigen(op, 40, 17, 40, 1e-6, &RandomStream::new(0)).is_err());
        assert!(top_eigen(op, 4, 2, 1, 1e-6, &RandomStream::new(0)).is_err());
        let nan = |v: &[f64]| vec![f64::NAN; v.len()];
        assert!(matches!(top_eigen(nan, 4, 1, 4, 1e-6, &RandomStream::new(0)), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn preconditioned_cases() {
        let q = QuadraticProblem::diagonal(&[5.0, 2.0, 0.5]).unwrap();
        let hvp = |v: &[f64]| q.hvp(&[0.0; 3], v);
        let s = preconditioned_sharpness(hvp, &q.diag(), 10, 1e-12, &RandomStream::new(1)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);

        let a = random_symmetric(&[4.0, 3.0, 2.5, 2.0, 1.5, 1.0, 0.9, 0.8, 0.5, 0.3, 0.2, 0.1], 2);
        let plain = top_eigen(dense_op(&a), 12, 2, 12, 1e-8, &RandomStream::new(3)).unwrap();
        let unit = preconditioned_top_eigen(dense_op(&a), &[1.0; 12], 2, 12, 1e-8, &RandomStream::new(3)).unwrap();
        assert_eq!(plain, unit);

        let mut rng = RandomStream::new(4).rng();
        let p: Vec<f64> = (0..12).map(|_| rng.gen_range(0.2..5.0)).collect();
        let mut scaled = a.clone();
        for i in 0..12 {
            for j in 0..12 {
                scaled[[i, j]] /= (p[i] * p[j]).sqrt();
            }
        }
        let dense = symmetric_eig(&scaled).unwrap();
        let s = preconditioned_sharpness(dense_op(&a), &p, 12, 1e-12, &RandomStream::new(5)).unwrap();
        assert!((s - dense.values[0]).abs() < 1e-8 * dense.values[0]);

        assert!(matches!(
            preconditioned_sharpness(dense_op(&a), &[0.0; 12], 12, 1e-8, &RandomStream::new(5)),
            Err(Error::Domain(_))
        ));
    }
}
