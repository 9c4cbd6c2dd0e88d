use serde::{Deserialize, Serialize};

use crate::numerics::{norm, RandomStream};
use crate::stability::{
    classify_stability, mode_diagnostics, perturbed_gradient, ModeDiagnostics, PosteriorSpec, QuadraticProblem,
    StabilityClass, StabilityCriteria,
};
use crate::{Error, Objective, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadOptimizer {
    Gd,
    Vgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadStep {
    pub step: usize,
    pub loss: f64,
    pub iterate_norm: f64,
    pub modes: ModeDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadTrajectory {
    /// One row per iterate, starting with `m0` at step 0.
    pub steps: Vec<QuadStep>,
    pub final_iterate: Vec<f64>,
    /// `None` when the trace is shorter than the classifier window.
    pub class: Option<StabilityClass>,
    /// The run stopped early on a non-finite loss.
    pub truncated: bool,
}

impl QuadTrajectory {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.iterate_norm).collect()
    }
}

/// Runs GD or variational GD on a quadratic. VGD step `t` draws from
/// `stream.child(t)`. GD rows report noiseless thresholds (`2/rho`).
pub fn run_quadratic_trajectory(
    problem: &QuadraticProblem,
    optimizer: QuadOptimizer,
    spec: &PosteriorSpec,
    m0: &[f64],
    rho: f64,
    steps: usize,
    stream: &RandomStream,
) -> Result<QuadTrajectory> {
    if steps == 0 {
        return Err(Error::Precondition("trajectory needs at least one step".into()));
    }
    if m0.len() != problem.dim() || spec.dim() != problem.dim() {
        return Err(Error::contract("iterate, posterior and problem dimensions differ"));
    }
    let noiseless = PosteriorSpec::noiseless(problem.dim());
    let diag_spec = match optimizer {
        QuadOptimizer::Gd => &noiseless,
        QuadOptimizer::Vgd => spec,
    };
    let sampler = spec.sampler()?;
    let mut m = m0.to_vec();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut truncated = false;
    for t in 0..=steps {
        let loss = problem.loss(&m);
        if !loss.is_finite() || m.iter().any(|v| !v.is_finite()) {
            truncated = true;
            break;
        }
        rows.push(QuadStep {
            step: t,
            loss,
            iterate_norm: norm(&m),
            modes: mode_diagnostics(problem, diag_spec, &m, rho)?,
        });
        if t == steps {
            break;
        }
        let g = match optimizer {
            QuadOptimizer::Gd => problem.gradient(&m),
            QuadOptimizer::Vgd => {
                perturbed_gradient(problem, &m, &sampler, spec.n_samples, &mut stream.child(t as u64).rng())?
            }
        };
        for (mi, gi) in m.iter_mut().zip(&g) {
            *mi -= rho * gi;
        }
    }
    let criteria = StabilityCriteria::default();
    let class = if truncated {
        Some(StabilityClass::Divergent)
    } else if rows.len() >= criteria.min_len {
        let loss: Vec<f64> = rows.iter().map(|r| r.loss).collect();
        let norms: Vec<f64> = rows.iter().map(|r| r.iterate_norm).collect();
        Some(classify_stability(&loss, &norms, &criteria)?)
    } else {
        None
    };
    Ok(QuadTrajectory {
        steps: rows,
        final_iterate: m,
        class,
        truncated,
    })
}
