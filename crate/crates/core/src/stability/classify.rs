use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityClass {
    Converged,
    StochasticallyStable,
    Divergent,
}

/// Thresholds used by [`classify_stability`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCriteria {
    /// Divergent when the mean loss of the final quarter reaches this
    /// multiple of the initial loss.
    pub divergence_factor: f64,
    /// Converged when every iterate norm in the final quarter is below
    /// `convergence_tol * max(1, |m_0|)`.
    pub convergence_tol: f64,
    pub min_len: usize,
}

impl Default for StabilityCriteria {
    fn default() -> Self {
        Self {
            divergence_factor: 1e6,
            convergence_tol: 1e-8,
            min_len: 8,
        }
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Classifies a trajectory from its loss and iterate-norm traces.
///
/// Order of tests: any non-finite value, then loss blow-up relative to the
/// start, then convergence of the tail norms, then stationarity of the last
/// two quarter windows (means within twice the pooled standard deviation).
/// A tail that keeps shrinking counts as converging; one that keeps growing
/// counts as divergent.
pub fn classify_stability(loss: &[f64], iterate_norm: &[f64], criteria: &StabilityCriteria) -> Result<StabilityClass> {
    if loss.len() != iterate_norm.len() {
        return Err(Error::contract(format!(
            "trace lengths differ: {} losses vs {} norms",
            loss.len(),
            iterate_norm.len()
        )));
    }
    if loss.len() < criteria.min_len.max(4) {
        return Err(Error::contract(format!(
            "trace of length {} is shorter than the window {}",
            loss.len(),
            criteria.min_len.max(4)
        )));
    }
    if loss.iter().chain(iterate_norm).any(|v| !v.is_finite()) {
        return Ok(StabilityClass::Divergent);
    }
    let n = loss.len();
    let quarter = n / 4;
    let tail = &loss[n - quarter..];
    let initial = loss[0].abs().max(f64::MIN_POSITIVE);
    let tail_mean = tail.iter().sum::<f64>() / quarter as f64;
    if tail_mean >= criteria.divergence_factor * initial {
        return Ok(StabilityClass::Divergent);
    }
    let scale = iterate_norm[0].abs().max(1.0);
    if iterate_norm[n - quarter..].iter().all(|&v| v < criteria.convergence_tol * scale) {
        return Ok(StabilityClass::Converged);
    }
    let logs: Vec<f64> = iterate_norm.iter().map(|v| v.max(1e-300).ln()).collect();
    let (m3, s3) = mean_sd(&logs[n - 2 * quarter..n - quarter]);
    let (m4, s4) = mean_sd(&logs[n - quarter..]);
    let pooled = (0.5 * (s3 * s3 + s4 * s4)).sqrt();
    if (m4 - m3).abs() <= 2.0 * pooled {
        Ok(StabilityClass::StochasticallyStable)
    } else if m4 < m3 {
        Ok(StabilityClass::Converged)
    } else {
        Ok(StabilityClass::Divergent)
    }
}
