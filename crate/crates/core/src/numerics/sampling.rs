use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Zero-mean Gaussian with diagonal covariance `diag(sigma2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    sigma2: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(sigma2: Vec<f64>) -> Result<Self> {
        if sigma2.is_empty() {
            return Err(Error::spec("gaussian dimension must be positive"));
        }
        if let Some((i, v)) = sigma2.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::spec(format!("variance {v} at coordinate {i} is not a finite non-negative number")));
        }
        Ok(Self { sigma2 })
    }

    pub fn isotropic(dim: usize, sigma2: f64) -> Result<Self> {
        Self::new(vec![sigma2; dim])
    }

    pub fn dim(&self) -> usize {
        self.sigma2.len()
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    /// Writes one draw into `out`. A normal deviate is consumed for every
    /// coordinate, including zero-variance ones, so streams stay aligned when
    /// only the variances change.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.sigma2.len());
        for (o, &s2) in out.iter_mut().zip(&self.sigma2) {
            let z: f64 = StandardNormal.sample(rng);
            *o = s2.sqrt() * z;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// Student-t perturbation with `alpha` degrees of freedom, rescaled per
/// coordinate so its variance equals `target_sigma2`.
#[derive(Clone, Debug)]
pub struct StudentT {
    alpha: f64,
    target_sigma2: Vec<f64>,
    dist: rand_distr::StudentT<f64>,
}

impl StudentT {
    pub fn new(alpha: f64, target_sigma2: Vec<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 2.0) {
            return Err(Error::spec(format!(
                "student-t degrees of freedom must exceed 2 for a finite variance, got {alpha}"
            )));
        }
        let target = DiagGaussian::new(target_sigma2)?.sigma2;
        let dist = rand_distr::StudentT::new(alpha).map_err(|e| Error::spec(e.to_string()))?;
        Ok(Self {
            alpha,
            target_sigma2: target,
            dist,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.target_sigma2.len()
    }

    /// Multiplier turning a unit Student-t draw (variance `alpha/(alpha-2)`)
    /// into one with unit variance.
    pub fn unit_variance_scale(&self) -> f64 {
        ((self.alpha - 2.0) / self.alpha).sqrt()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.target_sigma2.len());
        let scale = self.unit_variance_scale();
        for (o, &s2) in out.iter_mut().zip(&self.target_sigma2) {
            let t = self.dist.sample(rng);
            *o = scale * s2.sqrt() * t;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

pub fn sample_gaussian_diag<R: Rng + ?Sized>(rng: &mut R, spec: &DiagGaussian) -> Vec<f64> {
    spec.sample(rng)
}

pub fn sample_student_t<R: Rng + ?Sized>(rng: &mut R, spec: &StudentT) -> Vec<f64> {
    spec.sample(rng)
}
