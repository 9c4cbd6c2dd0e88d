use serde::{Deserialize, Serialize};

use super::factor::variational_factor_clamped;
use super::{PosteriorSpec, QuadraticProblem};
use crate::numerics::{dot, stable_sum};
use crate::{Error, Objective, Result};

fn check_dims(problem: &QuadraticProblem, spec: &PosteriorSpec, m: &[f64]) -> Result<()> {
    if m.len() != problem.dim() || spec.dim() != problem.dim() {
        return Err(Error::contract(format!(
            "dimension mismatch: problem {}, iterate {}, posterior {}",
            problem.dim(),
            m.len(),
            spec.dim()
        )));
    }
    spec.validate()
}

/// `z_i = N_s (lambda_i m^T v_i)^2 / (tau sigma_i^2)` for every mode.
///
/// Variances are paired with modes in descending order. A mode with zero
/// gradient component gets `z = 0`; a zero-variance mode with non-zero
/// gradient behaves like GD and gets `z = +inf`.
pub fn mode_z(problem: &QuadraticProblem, spec: &PosteriorSpec, m: &[f64]) -> Result<Vec<f64>> {
    check_dims(problem, spec, m)?;
    let proj = problem.project(m);
    let var = spec.sorted_variances();
    Ok(problem
        .eigenvalues()
        .iter()
        .zip(&proj)
        .zip(&var)
        .map(|((&lambda, &p), &s2)| {
            let a = (lambda * p).powi(2);
            if a == 0.0 {
                0.0
            } else if s2 == 0.0 {
                f64::INFINITY
            } else {
                spec.n_samples as f64 * a / s2
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDiagnostic {
    pub lambda: f64,
    pub z: f64,
    pub vf: f64,
    pub threshold: f64,
    pub margin: f64,
    /// `z` was below the floor and has been clamped before evaluating VF.
    pub clamped: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeDiagnostics {
    pub modes: Vec<ModeDiagnostic>,
}

impl ModeDiagnostics {
    pub fn thresholds(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.threshold).collect()
    }
}

pub fn mode_diagnostics(
    problem: &QuadraticProblem,
    spec: &PosteriorSpec,
    m: &[f64],
    rho: f64,
) -> Result<ModeDiagnostics> {
    let zs = mode_z(problem, spec, m)?;
    let modes = problem
        .eigenvalues()
        .iter()
        .zip(zs)
        .map(|(&lambda, z)| {
            let (vf, clamped) = variational_factor_clamped(z, rho)?;
            let threshold = 2.0 / rho * vf;
            Ok(ModeDiagnostic {
                lambda,
                z,
                vf,
                threshold,
                margin: threshold - lambda,
                clamped,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ModeDiagnostics { modes })
}

/// Exact `E[l(m_{t+1})] - l(m_t)` for one variational GD step on the
/// quadratic:
///
/// `-rho g^T (I - rho/2 Q) g + rho^2 / (2 N_s) Tr(Sigma Q^3)`, `g = Q m`.
///
/// Only the covariance of the perturbation enters, so the formula holds for
/// every family in [`PosteriorSpec`].
pub fn expected_loss_change(problem: &QuadraticProblem, m: &[f64], rho: f64, spec: &PosteriorSpec) -> Result<f64> {
    check_dims(problem, spec, m)?;
    let g = problem.gradient(m);
    let qg = problem.apply(&g);
    let deterministic = -rho * dot(&g, &g) + 0.5 * rho * rho * dot(&g, &qg);
    if spec.is_noiseless() {
        return Ok(deterministic);
    }
    let cube = problem.cube_diagonal();
    let trace = stable_sum(spec.effective_variances().iter().zip(&cube).map(|(s, c)| s * c));
    Ok(deterministic + rho * rho / (2.0 * spec.n_samples as f64) * trace)
}

/// Per-mode terms `f_i = -rho a_i + rho^2/2 lambda_i a_i + rho^2/(2 N_s) sigma_i^2 lambda_i^3`
/// whose sum upper-bounds the expected change (with equality for isotropic
/// covariance).
pub fn per_mode_bound_terms(
    problem: &QuadraticProblem,
    m: &[f64],
    rho: f64,
    spec: &PosteriorSpec,
) -> Result<Vec<f64>> {
    check_dims(problem, spec, m)?;
    let proj = problem.project(m);
    let var = spec.sorted_variances();
    let ns = spec.n_samples as f64;
    Ok(problem
        .eigenvalues()
        .iter()
        .zip(&proj)
        .zip(&var)
        .map(|((&lambda, &p), &s2)| {
            let a = (lambda * p).powi(2);
            -rho * a + 0.5 * rho * rho * lambda * a + 0.5 * rho * rho / ns * s2 * lambda.powi(3)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentCheck {
    pub per_mode: Vec<bool>,
    pub overall: bool,
    pub diagnostics: ModeDiagnostics,
}

/// Per-mode sufficient condition `lambda_i < (2/rho) VF(z_i)`. Ties count as
/// failures.
pub fn sufficient_descent_check(
    problem: &QuadraticProblem,
    m: &[f64],
    rho: f64,
    spec: &PosteriorSpec,
) -> Result<DescentCheck> {
    let diagnostics = mode_diagnostics(problem, spec, m, rho)?;
    let per_mode: Vec<bool> = diagnostics.modes.iter().map(|d| d.lambda < d.threshold).collect();
    let overall = per_mode.iter().all(|&p| p);
    Ok(DescentCheck {
        per_mode,
        overall,
        diagnostics,
    })
}

/// Exact condition for descent in expectation: the expected change is
/// negative.
pub fn necessary_sufficient_check(
    problem: &QuadraticProblem,
    m: &[f64],
    rho: f64,
    spec: &PosteriorSpec,
) -> Result<bool> {
    Ok(expected_loss_change(problem, m, rho, spec)? < 0.0)
}
