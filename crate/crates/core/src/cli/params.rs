//! Parameter blocks for each experiment kind. Every struct has full defaults,
//! so a config file only names what it changes.

use serde::{Deserialize, Serialize};

use crate::quadlab::{AxisSpec, GridExperimentConfig, QuadOptimizer};
use crate::training::{OptimizerKind, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapParams {
    /// Columns, `1/sigma^2`.
    pub x: AxisSpec,
    /// Rows, `lambda`.
    pub y: AxisSpec,
    pub rho: f64,
    pub n_samples: usize,
    pub m0: f64,
    pub trials: usize,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        let g = GridExperimentConfig::descent_heatmap_default();
        Self {
            x: g.x,
            y: g.y,
            rho: g.rho,
            n_samples: g.n_samples,
            m0: g.m0,
            trials: g.trials,
        }
    }
}

impl HeatmapParams {
    pub fn grid(&self, seed: u64) -> GridExperimentConfig {
        GridExperimentConfig {
            x: self.x.clone(),
            y: self.y.clone(),
            rho: self.rho,
            n_samples: self.n_samples,
            lambda: 0.0,
            m0: self.m0,
            trials: self.trials,
            seed,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = grid_violations(&self.grid(0), "inverse_variance", "lambda");
        if self.n_samples == 0 {
            v.push("n_samples must be at least 1".into());
        }
        if self.x.min <= 0.0 {
            v.push("x.min must be positive on the inverse-variance axis".into());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryParams {
    /// Columns, `N_s`. Values are rounded to integers.
    pub x: AxisSpec,
    /// Rows, `sigma^2`.
    pub y: AxisSpec,
    pub rho: f64,
    pub lambda: f64,
    pub m0: f64,
    pub trials: usize,
    pub steps: usize,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        let g = GridExperimentConfig::stability_boundary_default();
        Self {
            x: g.x,
            y: g.y,
            rho: g.rho,
            lambda: g.lambda,
            m0: g.m0,
            trials: g.trials,
            steps: 2000,
        }
    }
}

impl BoundaryParams {
    pub fn grid(&self, seed: u64) -> GridExperimentConfig {
        GridExperimentConfig {
            x: self.x.clone(),
            y: self.y.clone(),
            rho: self.rho,
            n_samples: 0,
            lambda: self.lambda,
            m0: self.m0,
            trials: self.trials,
            seed,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = grid_violations(&self.grid(0), "n_samples", "sigma2");
        if self.x.min < 1.0 {
            v.push("x.min must be at least 1 on the sample-count axis".into());
        }
        if self.y.min < 0.0 {
            v.push("y.min must be non-negative on the variance axis".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            v.push(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.steps < 8 {
            v.push("steps must be at least 8".into());
        }
        v
    }
}

fn grid_violations(g: &GridExperimentConfig, x: &str, y: &str) -> Vec<String> {
    let mut v = Vec::new();
    if g.x.name != x {
        v.push(format!("x.name must be \"{x}\", got \"{}\"", g.x.name));
    }
    if g.y.name != y {
        v.push(format!("y.name must be \"{y}\", got \"{}\"", g.y.name));
    }
    for (key, axis) in [("x", &g.x), ("y", &g.y)] {
        if let Err(e) = axis.validate() {
            v.push(format!("{key}: {e}"));
        }
    }
    if !(g.rho > 0.0 && g.rho.is_finite()) {
        v.push(format!("rho must be positive, got {}", g.rho));
    }
    if g.trials == 0 {
        v.push("trials must be at least 1".into());
    }
    if !g.m0.is_finite() {
        v.push("m0 must be finite".into());
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramParams {
    pub lambda: f64,
    pub rho: f64,
    pub sigma2: f64,
    /// One run per entry; run `i` uses child stream `i`.
    pub n_samples: Vec<usize>,
    pub m0: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub range: [f64; 2],
    pub bins: usize,
}

impl Default for HistogramParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            rho: 1.5,
            sigma2: 1.0,
            n_samples: vec![1000, 200, 100, 50, 20, 10, 5],
            m0: 1.0,
            steps: 40_000,
            burn_in: 20_000,
            range: [-5.0, 5.0],
            bins: 50,
        }
    }
}

impl HistogramParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            v.push(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            v.push(format!("sigma2 must be finite and non-negative, got {}", self.sigma2));
        }
        if self.n_samples.is_empty() || self.n_samples.contains(&0) {
            v.push("n_samples must be a non-empty list of positive counts".into());
        }
        if self.steps <= self.burn_in {
            v.push(format!("steps {} must exceed burn_in {}", self.steps, self.burn_in));
        }
        if !(self.range[0] < self.range[1]) {
            v.push("range must be increasing".into());
        }
        if self.bins == 0 {
            v.push("bins must be at least 1".into());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadTrajectoryParams {
    pub optimizer: QuadOptimizer,
    pub eigenvalues: Vec<f64>,
    /// Rotate the eigenbasis randomly (child stream 0); otherwise diagonal.
    pub rotate: bool,
    /// Starting point; empty means all ones.
    pub m0: Vec<f64>,
    pub sigma2: f64,
    pub n_samples: usize,
    pub rho: f64,
    pub steps: usize,
    pub log_every: usize,
}

impl Default for QuadTrajectoryParams {
    fn default() -> Self {
        Self {
            optimizer: QuadOptimizer::Vgd,
            eigenvalues: vec![15.0, 6.0, 1.0],
            rotate: true,
            m0: Vec::new(),
            sigma2: 0.1,
            n_samples: 1,
            rho: 0.1,
            steps: 500,
            log_every: 1,
        }
    }
}

impl QuadTrajectoryParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.eigenvalues.is_empty() || self.eigenvalues.iter().any(|l| !l.is_finite()) {
            v.push("eigenvalues must be a non-empty list of finite numbers".into());
        }
        if !self.m0.is_empty() && self.m0.len() != self.eigenvalues.len() {
            v.push(format!(
                "m0 has {} entries but there are {} eigenvalues",
                self.m0.len(),
                self.eigenvalues.len()
            ));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            v.push(format!("sigma2 must be finite and non-negative, got {}", self.sigma2));
        }
        if self.n_samples == 0 {
            v.push("n_samples must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            v.push(format!("rho must be positive, got {}", self.rho));
        }
        if self.steps == 0 {
            v.push("steps must be at least 1".into());
        }
        if self.log_every == 0 {
            v.push("log_every must be at least 1".into());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingParams {
    /// Point at which the averaged curvature is sampled.
    pub theta: f64,
    pub sigma2: f64,
    pub n_samples: Vec<usize>,
    pub realizations: usize,
    /// Variances at which the smoothed minimiser and its curvature are tabulated.
    pub sigma2_grid: Vec<f64>,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            sigma2: 0.05,
            n_samples: vec![10, 30, 100, 300, 1000],
            realizations: 2000,
            sigma2_grid: (0..=10).map(|i| 0.03 * i as f64).collect(),
        }
    }
}

impl SmoothingParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.theta.is_finite() {
            v.push("theta must be finite".into());
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            v.push(format!("sigma2 must be finite and non-negative, got {}", self.sigma2));
        }
        if self.n_samples.is_empty() || self.n_samples.contains(&0) {
            v.push("n_samples must be a non-empty list of positive counts".into());
        }
        if self.realizations < 2 {
            v.push("realizations must be at least 2".into());
        }
        if self.sigma2_grid.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            v.push("sigma2_grid entries must be finite and non-negative".into());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EscapeParams {
    pub rho: f64,
    /// One batch of runs per variance; entry `i` uses child stream `i`.
    pub sigma2: Vec<f64>,
    pub n_samples: usize,
    pub steps: usize,
    pub m0: f64,
    pub runs: usize,
}

impl Default for EscapeParams {
    fn default() -> Self {
        Self {
            rho: 0.02,
            sigma2: vec![0.0, 0.1],
            n_samples: 1,
            steps: 200,
            m0: 1.0,
            runs: 100,
        }
    }
}

impl EscapeParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            v.push(format!("rho must be positive, got {}", self.rho));
        }
        if self.sigma2.is_empty() || self.sigma2.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            v.push("sigma2 must be a non-empty list of finite non-negative variances".into());
        }
        if self.n_samples == 0 {
            v.push("n_samples must be at least 1".into());
        }
        if self.steps == 0 {
            v.push("steps must be at least 1".into());
        }
        if !self.m0.is_finite() {
            v.push("m0 must be finite".into());
        }
        if self.runs == 0 {
            v.push("runs must be at least 1".into());
        }
        v
    }
}

/// Per-mode thresholds along a VGD run; the spectrum is measured at every
/// logged step with `eigen_k` modes.
pub fn spectrum_default() -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::Vgd,
        rho: 0.05,
        sigma2: 1e-4,
        eigen_k: 10,
        log_every: 20,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VonCompareParams {
    pub adam: TrainConfig,
    pub ivon: TrainConfig,
}

impl Default for VonCompareParams {
    fn default() -> Self {
        let base = TrainConfig {
            rho: 1e-3,
            steps: 3000,
            log_every: 20,
            temperature: 1e-3,
            ..TrainConfig::default()
        };
        Self {
            adam: TrainConfig {
                optimizer: OptimizerKind::Adam,
                temperature: 1.0,
                ..base.clone()
            },
            ivon: TrainConfig {
                optimizer: OptimizerKind::Ivon,
                ..base
            },
        }
    }
}

impl VonCompareParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.adam.optimizer != OptimizerKind::Adam {
            v.push("adam.optimizer must be \"adam\"".into());
        }
        if self.ivon.optimizer != OptimizerKind::Ivon {
            v.push("ivon.optimizer must be \"ivon\"".into());
        }
        v.extend(self.adam.violations().into_iter().map(|s| format!("adam.{s}")));
        v.extend(self.ivon.violations().into_iter().map(|s| format!("ivon.{s}")));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElboSweepParams {
    /// Shared settings; `base.sigma2` is replaced by each sweep value.
    pub base: TrainConfig,
    pub sigma2: Vec<f64>,
}

impl Default for ElboSweepParams {
    fn default() -> Self {
        Self {
            base: TrainConfig {
                optimizer: OptimizerKind::Vgd,
                rho: 0.05,
                steps: 1000,
                batch_size: 32,
                elbo_samples: 16,
                log_every: 20,
                ..TrainConfig::default()
            },
            sigma2: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

impl ElboSweepParams {
    pub fn configs(&self) -> Vec<TrainConfig> {
        self.sigma2
            .iter()
            .map(|&s| TrainConfig {
                sigma2: s,
                ..self.base.clone()
            })
            .collect()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.sigma2.is_empty() {
            v.push("sigma2 must list at least one variance".into());
        }
        if !matches!(self.base.optimizer, OptimizerKind::Vgd) {
            v.push("base.optimizer must be \"vgd\"".into());
        }
        if self.base.elbo_samples == 0 {
            v.push("base.elbo_samples must be at least 1".into());
        }
        if self.sigma2.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            v.push("sigma2 entries must be positive for the entropy to exist".into());
        }
        v.extend(self.base.violations().into_iter().map(|s| format!("base.{s}")));
        v
    }
}
