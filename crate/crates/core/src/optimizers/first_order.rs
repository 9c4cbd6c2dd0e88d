use serde::{Deserialize, Serialize};

use crate::numerics::RandomStream;
use crate::stability::{perturbed_gradient, PosteriorSpec};
use crate::{Error, Objective, Result};

pub(crate) fn check_finite(g: &[f64], context: &str) -> Result<()> {
    match g.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            context: format!("{context} coordinate {i}"),
            sample: 0,
        }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdState {
    pub mean: Vec<f64>,
    pub rho: f64,
    pub step: u64,
}

impl GdState {
    pub fn new(mean: Vec<f64>, rho: f64) -> Self {
        Self { mean, rho, step: 0 }
    }
}

/// `m <- m - rho grad l(m)`
pub fn gd_step<O: Objective + ?Sized>(state: &mut GdState, objective: &O) -> Result<()> {
    let g = objective.gradient(&state.mean);
    check_finite(&g, "gradient")?;
    for (m, gi) in state.mean.iter_mut().zip(&g) {
        *m -= state.rho * gi;
    }
    state.step += 1;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VgdState {
    pub mean: Vec<f64>,
    pub spec: PosteriorSpec,
    pub rho: f64,
    pub step: u64,
}

impl VgdState {
    pub fn new(mean: Vec<f64>, spec: PosteriorSpec, rho: f64) -> Result<Self> {
        spec.validate()?;
        if spec.dim() != mean.len() {
            return Err(Error::contract("posterior dimension differs from the mean"));
        }
        Ok(Self {
            mean,
            spec,
            rho,
            step: 0,
        })
    }
}

/// `m <- m - rho (1/N_s) sum_i grad l(m + eps_i)` with fresh draws from
/// `stream`. Returns the averaged gradient.
pub fn vgd_step<O: Objective + ?Sized>(state: &mut VgdState, objective: &O, stream: &RandomStream) -> Result<Vec<f64>> {
    let sampler = state.spec.sampler()?;
    let g = perturbed_gradient(objective, &state.mean, &sampler, state.spec.n_samples, &mut stream.rng())?;
    for (m, gi) in state.mean.iter_mut().zip(&g) {
        *m -= state.rho * gi;
    }
    state.step += 1;
    Ok(g)
}

/// Adam without first-moment averaging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub mean: Vec<f64>,
    /// Second-moment EMA.
    pub v: Vec<f64>,
    pub t: u64,
    pub rho: f64,
    pub beta2: f64,
    pub eps: f64,
}

pub const DEFAULT_EPS: f64 = 1e-12;

impl AdamState {
    pub fn new(mean: Vec<f64>, rho: f64, beta2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta2) {
            return Err(Error::spec(format!("beta2 must lie in [0, 1), got {beta2}")));
        }
        let d = mean.len();
        Ok(Self {
            mean,
            v: vec![0.0; d],
            t: 0,
            rho,
            beta2,
            eps: DEFAULT_EPS,
        })
    }

    /// Bias-corrected `sqrt(v / (1 - beta2^t))`; all zeros before the first step.
    pub fn scale(&self) -> Vec<f64> {
        if self.t == 0 {
            return vec![0.0; self.v.len()];
        }
        let correction = 1.0 - self.beta2.powi(self.t as i32);
        self.v.iter().map(|v| (v / correction).sqrt()).collect()
    }

    /// Diagonal preconditioner `P = scale + eps` of the last step.
    pub fn preconditioner(&self) -> Vec<f64> {
        self.scale().iter().map(|p| p + self.eps).collect()
    }
}

/// `v <- beta2 v + (1 - beta2) g^2`, `p = sqrt(v / (1 - beta2^t))`,
/// `m <- m - rho g / (p + eps)`.
pub fn adam_step<O: Objective + ?Sized>(state: &mut AdamState, objective: &O) -> Result<()> {
    let g = objective.gradient(&state.mean);
    check_finite(&g, "gradient")?;
    state.t += 1;
    for (v, gi) in state.v.iter_mut().zip(&g) {
        *v = state.beta2 * *v + (1.0 - state.beta2) * gi * gi;
    }
    let p = state.scale();
    for ((m, gi), pi) in state.mean.iter_mut().zip(&g).zip(&p) {
        *m -= state.rho * gi / (pi + state.eps);
    }
    Ok(())
}
