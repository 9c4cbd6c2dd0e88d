use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: AxisScale,
}

impl AxisSpec {
    pub fn linear(name: &str, min: f64, max: f64, count: usize) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            count,
            scale: AxisScale::Linear,
        }
    }

    pub fn log(name: &str, min: f64, max: f64, count: usize) -> Self {
        Self {
            scale: AxisScale::Log,
            ..Self::linear(name, min, max, count)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::spec(format!("axis {}: count {} < 2", self.name, self.count)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::spec(format!(
                "axis {}: need finite min < max, got [{}, {}]",
                self.name, self.min, self.max
            )));
        }
        if self.scale == AxisScale::Log && self.min <= 0.0 {
            return Err(Error::spec(format!("axis {}: log axis needs min > 0", self.name)));
        }
        Ok(())
    }

    /// Grid points, endpoints included exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == n - 1 {
                    return self.max;
                }
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * t,
                    AxisScale::Log => self.min * (self.max / self.min).powf(t),
                }
            })
            .collect()
    }
}

/// Two-axis experiment grid with the fixed parameters of the 1-D quadratic
/// `l(m) = lambda/2 m^2`. Which fixed fields are used depends on the
/// experiment: the descent heatmap sweeps `(1/sigma^2, lambda)` at fixed
/// `n_samples`, the stability boundary sweeps `(N_s, sigma^2)` at fixed
/// `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridExperimentConfig {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub rho: f64,
    pub n_samples: usize,
    pub lambda: f64,
    pub m0: f64,
    pub trials: usize,
    pub seed: u64,
}

impl GridExperimentConfig {
    /// 50x50 grid over `1/sigma^2` in `[1e-2, 1e2]` (log) and `lambda` in
    /// `[0.5, 25]`, `rho = 0.1`, `N_s = 1`, 10 trials per cell.
    pub fn descent_heatmap_default() -> Self {
        Self {
            x: AxisSpec::log("inverse_variance", 1e-2, 1e2, 50),
            y: AxisSpec::linear("lambda", 0.5, 25.0, 50),
            rho: 0.1,
            n_samples: 1,
            lambda: 0.0,
            m0: 1.0,
            trials: 10,
            seed: 0,
        }
    }

    /// `N_s` in 1..=20 against `sigma^2` in `[0, 80]`, `lambda = 5`,
    /// `rho = 0.1`, 32 trajectories per cell.
    pub fn stability_boundary_default() -> Self {
        Self {
            x: AxisSpec::linear("n_samples", 1.0, 20.0, 20),
            y: AxisSpec::linear("sigma2", 0.0, 80.0, 41),
            rho: 0.1,
            n_samples: 0,
            lambda: 5.0,
            m0: 1.0,
            trials: 32,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::spec(format!("rho must be positive, got {}", self.rho)));
        }
        if self.trials == 0 {
            return Err(Error::spec("trials must be at least 1"));
        }
        if !self.m0.is_finite() {
            return Err(Error::spec("m0 must be finite"));
        }
        Ok(())
    }

    pub(crate) fn expect_axes(&self, x: &str, y: &str) -> Result<()> {
        if self.x.name != x || self.y.name != y {
            return Err(Error::spec(format!(
                "expected axes ({x}, {y}), got ({}, {})",
                self.x.name, self.y.name
            )));
        }
        Ok(())
    }
}
