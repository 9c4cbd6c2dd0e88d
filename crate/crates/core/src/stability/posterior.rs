use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{DiagGaussian, StudentT};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PerturbationFamily {
    GaussianIsotropic,
    GaussianDiagonal,
    StudentT { alpha: f64 },
}

/// Shape of the fixed perturbation distribution used by variational GD.
///
/// The effective per-coordinate variance is `temperature * sigma2[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSpec {
    pub family: PerturbationFamily,
    pub sigma2: Vec<f64>,
    pub n_samples: usize,
    pub temperature: f64,
}

impl PosteriorSpec {
    pub fn isotropic(dim: usize, sigma2: f64, n_samples: usize) -> Result<Self> {
        let spec = Self {
            family: PerturbationFamily::GaussianIsotropic,
            sigma2: vec![sigma2; dim],
            n_samples,
            temperature: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn diagonal(sigma2: Vec<f64>, n_samples: usize) -> Result<Self> {
        let spec = Self {
            family: PerturbationFamily::GaussianDiagonal,
            sigma2,
            n_samples,
            temperature: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn student_t(dim: usize, sigma2: f64, n_samples: usize, alpha: f64) -> Result<Self> {
        let spec = Self {
            family: PerturbationFamily::StudentT { alpha },
            sigma2: vec![sigma2; dim],
            n_samples,
            temperature: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Zero-variance spec: variational GD with it is plain GD.
    pub fn noiseless(dim: usize) -> Self {
        Self {
            family: PerturbationFamily::GaussianIsotropic,
            sigma2: vec![0.0; dim],
            n_samples: 1,
            temperature: 1.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        self.temperature = temperature;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.sigma2.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma2.is_empty() {
            return Err(Error::spec("posterior dimension must be positive"));
        }
        if self.n_samples < 1 {
            return Err(Error::spec("number of posterior samples must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::spec(format!("temperature must be positive, got {}", self.temperature)));
        }
        if let Some(v) = self.sigma2.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::spec(format!("variance {v} is not a finite non-negative number")));
        }
        match self.family {
            PerturbationFamily::GaussianIsotropic => {
                if self.sigma2.iter().any(|&v| v != self.sigma2[0]) {
                    return Err(Error::spec("isotropic family needs equal variances"));
                }
            }
            PerturbationFamily::GaussianDiagonal => {}
            PerturbationFamily::StudentT { alpha } => {
                if !(alpha > 2.0) {
                    return Err(Error::spec(format!("student-t needs alpha > 2, got {alpha}")));
                }
            }
        }
        Ok(())
    }

    /// `temperature * sigma2`, in parameter coordinates.
    pub fn effective_variances(&self) -> Vec<f64> {
        self.sigma2.iter().map(|s| s * self.temperature).collect()
    }

    /// Effective variances sorted in descending order; the i-th one is paired
    /// with the i-th largest curvature in the per-mode bound.
    pub fn sorted_variances(&self) -> Vec<f64> {
        let mut v = self.effective_variances();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma2.iter().all(|&s| s == 0.0)
    }

    pub fn sampler(&self) -> Result<Perturbation> {
        self.validate()?;
        let var = self.effective_variances();
        Ok(match self.family {
            PerturbationFamily::StudentT { alpha } => Perturbation::StudentT(StudentT::new(alpha, var)?),
            _ => Perturbation::Gaussian(DiagGaussian::new(var)?),
        })
    }
}

/// Ready-to-draw perturbation distribution built from a [`PosteriorSpec`].
#[derive(Clone, Debug)]
pub enum Perturbation {
    Gaussian(DiagGaussian),
    StudentT(StudentT),
}

impl Perturbation {
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Perturbation::Gaussian(g) => g.sample_into(rng, out),
            Perturbation::StudentT(t) => t.sample_into(rng, out),
        }
    }
}
