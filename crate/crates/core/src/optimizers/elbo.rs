use serde::{Deserialize, Serialize};

use crate::numerics::{NeumaierSum, RandomStream};
use crate::stability::{PerturbationFamily, PosteriorSpec};
use crate::{Error, Objective, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    /// Monte-Carlo mean of the loss under the posterior.
    pub expected_loss: f64,
    /// Standard error of `expected_loss`.
    pub stderr: f64,
    pub entropy: f64,
    /// `expected_loss - entropy`, the quantity minimised.
    pub objective: f64,
}

/// Entropy `1/2 sum_i log(2 pi e tau sigma_i^2)` of a diagonal Gaussian.
pub fn gaussian_entropy(spec: &PosteriorSpec) -> Result<f64> {
    if matches!(spec.family, PerturbationFamily::StudentT { .. }) {
        return Err(Error::spec("closed-form entropy needs a Gaussian posterior"));
    }
    let vars = spec.effective_variances();
    if let Some(i) = vars.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("entropy undefined: variance of coordinate {i} is zero")));
    }
    let c = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    let mut acc = NeumaierSum::new();
    for v in vars {
        acc.add(0.5 * (c + v.ln()));
    }
    Ok(acc.value())
}

/// `E_q[l] - H(q)` with the expectation estimated from `spec.n_samples`
/// posterior draws.
pub fn elbo_estimate<O: Objective + ?Sized>(
    mean: &[f64],
    spec: &PosteriorSpec,
    objective: &O,
    stream: &RandomStream,
) -> Result<ElboEstimate> {
    let entropy = gaussian_entropy(spec)?;
    if spec.dim() != mean.len() {
        return Err(Error::contract("posterior dimension differs from the mean"));
    }
    let sampler = spec.sampler()?;
    let mut rng = stream.rng();
    let n = spec.n_samples;
    let mut eps = vec![0.0; mean.len()];
    let mut theta = vec![0.0; mean.len()];
    let mut losses = Vec::with_capacity(n);
    for k in 0..n {
        sampler.sample_into(&mut rng, &mut eps);
        for ((t, m), e) in theta.iter_mut().zip(mean).zip(&eps) {
            *t = m + e;
        }
        let l = objective.loss(&theta);
        if !l.is_finite() {
            return Err(Error::NonFinite {
                context: "loss under the posterior".into(),
                sample: k,
            });
        }
        losses.push(l);
    }
    let mut acc = NeumaierSum::new();
    losses.iter().for_each(|&l| acc.add(l));
    let expected_loss = acc.value() / n as f64;
    let var = if n > 1 {
        losses.iter().map(|l| (l - expected_loss).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(ElboEstimate {
        expected_loss,
        stderr: (var / n as f64).sqrt(),
        entropy,
        objective: expected_loss - entropy,
    })
}
