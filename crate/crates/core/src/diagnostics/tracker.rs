use serde::{Deserialize, Serialize};

use super::SpectralResult;
use crate::numerics::dot;
use crate::stability::{variational_factor_clamped, ModeDiagnostic, PosteriorSpec};
use crate::{Error, Result};

/// Sharpness and its predicted threshold on the normalised axis, where GD's
/// `2/rho` maps to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisPoint {
    pub sharpness: f64,
    /// `lambda_1 / (2/rho)`
    pub normalized_sharpness: f64,
    pub z: f64,
    pub vf: f64,
    pub clamped: bool,
}

/// `z = N_s (v^T g)^2 / sigma^2` with `sigma^2` already scaled by the
/// temperature. Zero projection gives 0; zero variance with a non-zero
/// projection gives `+inf` (the GD limit).
fn projection_z(v: &[f64], grad: &[f64], n_samples: usize, var: f64) -> f64 {
    let c = dot(v, grad).powi(2);
    if c == 0.0 {
        0.0
    } else if var == 0.0 {
        f64::INFINITY
    } else {
        n_samples as f64 * c / var
    }
}

/// Per-mode pairs `(lambda_i, (2/rho) VF(z_i))` with
/// `z_i = N_s (v_i^T grad)^2 / (tau sigma_i^2)`.
///
/// The gradient projection replaces `lambda_i m^T v_i`; the two agree on a
/// quadratic. Variances are paired with modes in descending order, as in the
/// closed-form per-mode bound.
pub fn spectrum_vs_thresholds(
    spectrum: &SpectralResult,
    grad: &[f64],
    rho: f64,
    spec: &PosteriorSpec,
) -> Result<Vec<ModeDiagnostic>> {
    spec.validate()?;
    if spec.dim() != grad.len() {
        return Err(Error::contract(format!(
            "posterior dimension {} differs from gradient length {}",
            spec.dim(),
            grad.len()
        )));
    }
    if spectrum.vectors.iter().any(|v| v.len() != grad.len()) {
        return Err(Error::contract("eigenvector length differs from gradient length"));
    }
    let var = spec.sorted_variances();
    spectrum
        .values
        .iter()
        .zip(&spectrum.vectors)
        .zip(&var)
        .map(|((&lambda, v), &s2)| {
            let z = projection_z(v, grad, spec.n_samples, s2);
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
        .collect()
}

/// Normalised sharpness `lambda_1 rho / 2` next to `VF(z_1)`, with `z_1`
/// from the gradient projection onto the top eigenvector.
pub fn hypothesis_tracker(
    spectrum: &SpectralResult,
    grad: &[f64],
    rho: f64,
    spec: &PosteriorSpec,
) -> Result<HypothesisPoint> {
    if spectrum.values.is_empty() {
        return Err(Error::Precondition("top eigenpair is missing".into()));
    }
    let top = SpectralResult {
        values: spectrum.values[..1].to_vec(),
        vectors: spectrum.vectors[..1].to_vec(),
        residuals: spectrum.residuals[..1].to_vec(),
        iterations: spectrum.iterations,
        converged: spectrum.converged,
    };
    let mode = spectrum_vs_thresholds(&top, grad, rho, spec)?.remove(0);
    Ok(HypothesisPoint {
        sharpness: mode.lambda,
        normalized_sharpness: mode.lambda * rho / 2.0,
        z: mode.z,
        vf: mode.vf,
        clamped: mode.clamped,
    })
}
