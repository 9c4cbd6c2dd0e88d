use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{expected_loss_change, Perturbation, PosteriorSpec, QuadraticProblem};
use crate::numerics::RandomStream;
use crate::{Error, Objective, Result};

/// Monte-Carlo gradient `(1/N_s) sum_i grad l(m + eps_i)`.
///
/// The mean is accumulated with a running update so that identical samples
/// (zero variance) reproduce the plain gradient bit for bit.
pub fn perturbed_gradient<O, R>(
    objective: &O,
    mean: &[f64],
    perturbation: &Perturbation,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let d = mean.len();
    let mut eps = vec![0.0; d];
    let mut point = vec![0.0; d];
    let mut avg = vec![0.0; d];
    for k in 0..n_samples {
        perturbation.sample_into(rng, &mut eps);
        for ((p, m), e) in point.iter_mut().zip(mean).zip(&eps) {
            *p = m + e;
        }
        let g = objective.gradient(&point);
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("perturbed gradient coordinate {i}"),
                sample: k,
            });
        }
        if k == 0 {
            avg.copy_from_slice(&g);
        } else {
            let w = 1.0 / (k + 1) as f64;
            for (a, gi) in avg.iter_mut().zip(&g) {
                *a += (gi - *a) * w;
            }
        }
    }
    Ok(avg)
}

/// Realised loss change of one variational GD step on a quadratic.
pub fn vgd_one_step_change<R: Rng + ?Sized>(
    problem: &QuadraticProblem,
    m: &[f64],
    rho: f64,
    spec: &PosteriorSpec,
    rng: &mut R,
) -> Result<f64> {
    let sampler = spec.sampler()?;
    let g = perturbed_gradient(problem, m, &sampler, spec.n_samples, rng)?;
    let next: Vec<f64> = m.iter().zip(&g).map(|(a, b)| a - rho * b).collect();
    Ok(problem.loss(&next) - problem.loss(m))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub probability: f64,
    pub successes: u64,
    pub trials: u64,
}

impl ProbabilityEstimate {
    fn from_counts(successes: u64, trials: u64) -> Self {
        Self {
            probability: successes as f64 / trials as f64,
            successes,
            trials,
        }
    }

    /// Binomial standard error of the estimate.
    pub fn stderr(&self) -> f64 {
        let p = self.probability;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Mean iterate after one variational GD step on `l(m) = lambda/2 m^2` with
/// perturbation standard deviation `sd`.
pub(crate) fn scalar_vgd_step<R: Rng + ?Sized>(lambda: f64, m: f64, rho: f64, sd: f64, n_samples: usize, rng: &mut R) -> f64 {
    let mut g = 0.0;
    for k in 0..n_samples {
        let z: f64 = rng.sample(StandardNormal);
        let gk = lambda * (m + sd * z);
        if k == 0 {
            g = gk;
        } else {
            g += (gk - g) / (k + 1) as f64;
        }
    }
    m - rho * g
}

/// Realised loss change of one scalar step. The noise is drawn in the frame
/// of `sign(m)`, which leaves its law unchanged and makes the outcome of each
/// trial exactly symmetric under `m -> -m`.
fn scalar_step_change<R: Rng + ?Sized>(lambda: f64, m: f64, rho: f64, sd: f64, n_samples: usize, rng: &mut R) -> f64 {
    let next = if m < 0.0 {
        -scalar_vgd_step(lambda, -m, rho, sd, n_samples, rng)
    } else {
        scalar_vgd_step(lambda, m, rho, sd, n_samples, rng)
    };
    0.5 * lambda * next * next - 0.5 * lambda * m * m
}

/// Fraction of trials in which one variational GD step on
/// `l(m) = lambda/2 m^2` strictly decreased the loss. Trial `t` draws from
/// `stream.child(t)`.
pub fn descent_probability_mc(
    lambda: f64,
    m: f64,
    rho: f64,
    sigma2: f64,
    n_samples: usize,
    trials: usize,
    stream: &RandomStream,
) -> Result<ProbabilityEstimate> {
    if trials == 0 {
        return Err(Error::Precondition("descent probability needs at least one trial".into()));
    }
    if n_samples == 0 || !(sigma2 >= 0.0) || !(rho > 0.0) {
        return Err(Error::spec(format!(
            "invalid descent experiment: n_samples={n_samples}, sigma2={sigma2}, rho={rho}"
        )));
    }
    let sd = sigma2.sqrt();
    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.child(t as u64).rng();
            u64::from(scalar_step_change(lambda, m, rho, sd, n_samples, &mut rng) < 0.0)
        })
        .sum();
    Ok(ProbabilityEstimate::from_counts(successes, trials as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginTrendPoint {
    pub n_samples: usize,
    /// Margin `delta = -E[change] > 0`.
    pub delta: f64,
    pub failure_probability: f64,
    pub stderr: f64,
}

/// Empirical `P(change >= 0)` for each sample count, on the scalar quadratic.
/// Every configuration must decrease the loss in expectation.
pub fn descent_margin_trend(
    lambda: f64,
    m: f64,
    rho: f64,
    sigma2: f64,
    n_samples_list: &[usize],
    trials: usize,
    stream: &RandomStream,
) -> Result<Vec<MarginTrendPoint>> {
    let problem = QuadraticProblem::scalar(lambda)?;
    n_samples_list
        .iter()
        .enumerate()
        .map(|(idx, &ns)| {
            let spec = PosteriorSpec::isotropic(1, sigma2, ns)?;
            let expected = expected_loss_change(&problem, &[m], rho, &spec)?;
            if expected >= 0.0 {
                return Err(Error::Precondition(format!(
                    "expected loss change {expected} is not negative at N_s={ns}"
                )));
            }
            let est = descent_probability_mc(lambda, m, rho, sigma2, ns, trials, &stream.child(idx as u64))?;
            let failure = 1.0 - est.probability;
            Ok(MarginTrendPoint {
                n_samples: ns,
                delta: -expected,
                failure_probability: failure,
                stderr: (failure * (1.0 - failure) / trials as f64).sqrt(),
            })
        })
        .collect()
}
