use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::first_order::{check_finite, DEFAULT_EPS};
use crate::numerics::RandomStream;
use crate::stability::QuadraticProblem;
use crate::{Error, Objective, Result};

/// Floor applied to the IVON precision after each update.
pub const PRECISION_FLOOR: f64 = 1e-8;

/// Gaussian posterior `N(m, tau diag(P)^-1)` and VON/IVON hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VonState {
    pub mean: Vec<f64>,
    pub precision: Vec<f64>,
    pub rho: f64,
    pub beta2: f64,
    pub temperature: f64,
    pub n_samples: usize,
    pub step: u64,
}

impl VonState {
    pub fn new(
        mean: Vec<f64>,
        precision: Vec<f64>,
        rho: f64,
        beta2: f64,
        temperature: f64,
        n_samples: usize,
    ) -> Result<Self> {
        if mean.len() != precision.len() {
            return Err(Error::contract("mean and precision lengths differ"));
        }
        if precision.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::spec("precision must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&beta2) || n_samples == 0 || !(temperature >= 0.0) {
            return Err(Error::spec("need beta2 in [0, 1], N_s >= 1 and tau >= 0"));
        }
        Ok(Self {
            mean,
            precision,
            rho,
            beta2,
            temperature,
            n_samples,
            step: 0,
        })
    }

    /// Per-coordinate posterior variance `tau / P_i`.
    pub fn posterior_variance(&self) -> Vec<f64> {
        self.precision.iter().map(|p| self.temperature / p).collect()
    }
}

/// VON with exact expectations on a quadratic (`E[grad] = Q m`,
/// `E[hess] = Q`): `P <- (1 - beta2) P + beta2 diag(Q)`, `m <- m - rho P^-1 Q m`.
pub fn von_step_exact_quadratic(state: &mut VonState, problem: &QuadraticProblem) -> Result<()> {
    let dq = problem.diag();
    let g = problem.gradient(&state.mean);
    let b = state.beta2;
    let next: Vec<f64> = state.precision.iter().zip(&dq).map(|(p, q)| (1.0 - b) * p + b * q).collect();
    if let Some(i) = next.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::Domain(format!("precision coordinate {i} became {}", next[i])));
    }
    for ((m, gi), p) in state.mean.iter_mut().zip(&g).zip(&next) {
        *m -= state.rho * gi / p;
    }
    state.precision = next;
    state.step += 1;
    Ok(())
}

/// Stein-identity estimates from `n_samples` draws `theta_i = m + eps_i`,
/// `eps_i ~ N(0, diag(sigma2))`: the Hessian diagonal
/// `h = (1/N) sum grad l(theta_i) * eps_i / sigma2` and the averaged
/// gradient `(1/N) sum grad l(theta_i)`.
pub fn stein_hessian_estimate<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    mean: &[f64],
    sigma2: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if sigma2.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Precondition("Stein estimator needs strictly positive posterior variance".into()));
    }
    if n_samples == 0 {
        return Err(Error::spec("n_samples must be at least 1"));
    }
    let d = mean.len();
    let sd: Vec<f64> = sigma2.iter().map(|s| s.sqrt()).collect();
    let mut h = vec![0.0; d];
    let mut gbar = vec![0.0; d];
    let mut eps = vec![0.0; d];
    let mut theta = vec![0.0; d];
    for k in 0..n_samples {
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            eps[i] = sd[i] * z;
            theta[i] = mean[i] + eps[i];
        }
        let g = objective.gradient(&theta);
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("IVON sample gradient coordinate {i}"),
                sample: k,
            });
        }
        for i in 0..d {
            h[i] += g[i] * eps[i] / sigma2[i];
            gbar[i] += g[i];
        }
    }
    let inv = 1.0 / n_samples as f64;
    h.iter_mut().for_each(|v| *v *= inv);
    gbar.iter_mut().for_each(|v| *v *= inv);
    Ok((h, gbar))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IvonStepInfo {
    /// Precision coordinates that hit the floor this step.
    pub clamped: usize,
    pub all_clamped: bool,
}

/// One IVON-style step: sample from `N(m, tau diag(P)^-1)`, estimate the
/// Hessian diagonal with Stein's identity, update
/// `P <- max((1 - beta2) P + beta2 h, floor)` and
/// `m <- m - rho P^-1 gbar`.
pub fn ivon_step<O: Objective + ?Sized>(state: &mut VonState, objective: &O, stream: &RandomStream) -> Result<IvonStepInfo> {
    if !(state.temperature > 0.0) {
        return Err(Error::Precondition("IVON needs tau > 0 (zero posterior variance)".into()));
    }
    let sigma2 = state.posterior_variance();
    let (h, gbar) = stein_hessian_estimate(objective, &state.mean, &sigma2, state.n_samples, &mut stream.rng())?;
    check_finite(&h, "Hessian estimate")?;
    let b = state.beta2;
    let mut info = IvonStepInfo::default();
    for (p, hi) in state.precision.iter_mut().zip(&h) {
        let next = (1.0 - b) * *p + b * hi;
        if next < PRECISION_FLOOR {
            info.clamped += 1;
            *p = PRECISION_FLOOR;
        } else {
            *p = next;
        }
    }
    info.all_clamped = info.clamped == state.precision.len();
    for ((m, g), p) in state.mean.iter_mut().zip(&gbar).zip(&state.precision) {
        *m -= state.rho * g / (p + DEFAULT_EPS);
    }
    state.step += 1;
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_preconditioning_on_diagonal_quadratic() {
        let q = QuadraticProblem::diagonal(&[5.0, 2.0, 0.5]).unwrap();
        for &b in &[0.0, 0.3, 1.0] {
            let mut s = VonState::new(vec![1.0, -2.0, 3.0], q.diag(), 0.2, b, 1.0, 1).unwrap();
            let before = s.mean.clone();
            von_step_exact_quadratic(&mut s, &q).unwrap();
            for (a, m) in s.mean.iter().zip(&before) {
                assert!((a - 0.8 * m).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn beta_one_resets_precision() {
        let q = QuadraticProblem::diagonal(&[5.0, 2.0]).unwrap();
        let mut s = VonState::new(vec![1.0, 1.0], vec![7.0, 0.1], 0.1, 1.0, 1.0, 1).unwrap();
        von_step_exact_quadratic(&mut s, &q).unwrap();
        assert_eq!(s.precision, vec![5.0, 2.0]);
    }

    #[test]
    fn fixed_precision_is_preconditioned_gd() {
        // beta2 = 0 keeps P fixed; the VON update is then preconditioned GD.
        let q = QuadraticProblem::random_rotation(&[4.0, 1.0, 0.3], &mut RandomStream::new(1).rng()).unwrap();
        let p = vec![2.0, 2.0, 2.0];
        let mut s = VonState::new(vec![1.0, 0.5, -1.0], p.clone(), 0.3, 0.0, 1.0, 1).unwrap();
        let mut m = s.mean.clone();
        for _ in 0..20 {
            von_step_exact_quadratic(&mut s, &q).unwrap();
            let g = q.gradient(&m);
            for i in 0..3 {
                m[i] -= 0.3 * g[i] / p[i];
            }
            assert_eq!(s.mean, m);
        }
    }

    #[test]
    fn stein_estimator_unbiased_on_quadratic() {
        let q = QuadraticProblem::random_rotation(&[6.0, 2.0, 0.5], &mut RandomStream::new(2).rng()).unwrap();
        let mean = [0.4, -1.0, 0.7];
        let sigma2 = [0.3, 0.3, 0.3];
        let trials = 100_000;
        let mut rng = RandomStream::new(3).rng();
        let d = 3;
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for _ in 0..trials {
            let (h, _) = stein_hessian_estimate(&q, &mean, &sigma2, 1, &mut rng).unwrap();
            for i in 0..d {
                sum[i] += h[i];
                sq[i] += h[i] * h[i];
            }
        }
        let diag = q.diag();
        for i in 0..d {
            let mu = sum[i] / trials as f64;
            let se = ((sq[i] / trials as f64 - mu * mu) / trials as f64).sqrt();
            assert!((mu - diag[i]).abs() < 3.5 * se, "coord {i}: {mu} vs {} (se {se})", diag[i]);
        }
    }

    #[test]
    fn zero_temperature_rejected() {
        let q = QuadraticProblem::diagonal(&[1.0]).unwrap();
        let mut s = VonState::new(vec![1.0], vec![1.0], 0.1, 0.1, 0.0, 1).unwrap();
        assert!(matches!(ivon_step(&mut s, &q, &RandomStream::new(0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn ivon_converges_on_quadratic() {
        let q = QuadraticProblem::diagonal(&[10.0, 1.0]).unwrap();
        let mut s = VonState::new(vec![1.0, 1.0], vec![10.0, 1.0], 0.1, 0.01, 0.1, 16).unwrap();
        let root = RandomStream::new(4);
        for t in 0..400 {
            ivon_step(&mut s, &q, &root.child(t)).unwrap();
        }
        assert!(s.mean.iter().all(|m| m.abs() < 0.05), "{:?}", s.mean);
        assert!((s.precision[0] - 10.0).abs() < 2.0 && (s.precision[1] - 1.0).abs() < 0.5, "{:?}", s.precision);
    }

    #[test]
    fn floor_reported() {
        // A concave direction drives the Hessian estimate negative.
        struct Concave;
        impl Objective for Concave {
            fn dim(&self) -> usize {
                1
            }
            fn loss(&self, p: &[f64]) -> f64 {
                -p[0] * p[0]
            }
            fn gradient(&self, p: &[f64]) -> Vec<f64> {
                vec![-2.0 * p[0]]
            }
            fn hvp(&self, _: &[f64], d: &[f64]) -> Vec<f64> {
                vec![-2.0 * d[0]]
            }
        }
        let mut s = VonState::new(vec![0.0], vec![1.0], 0.01, 1.0, 1.0, 200).unwrap();
        let info = ivon_step(&mut s, &Concave, &RandomStream::new(5)).unwrap();
        assert!(info.all_clamped);
        assert_eq!(s.precision[0], PRECISION_FLOOR);
    }
}
