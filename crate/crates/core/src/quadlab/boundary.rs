use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GridExperimentConfig;
use crate::numerics::RandomStream;
use crate::stability::{classify_stability, scalar_vgd_step, StabilityClass, StabilityCriteria};
use crate::{Error, Result};

/// Least-squares line `sigma^2 = slope * N_s` through the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFit {
    pub slope: f64,
    /// Centred coefficient of determination of the fit.
    pub r_squared: f64,
    /// Columns that had both a stable and an unstable cell.
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityBoundary {
    pub n_samples: Vec<usize>,
    pub sigma2: Vec<f64>,
    /// `stable[row][col]` with rows indexed by `sigma2`, columns by `n_samples`.
    pub stable: Vec<Vec<bool>>,
    /// Fraction of trajectories per cell classified divergent.
    pub unstable_fraction: Vec<Vec<f64>>,
    /// Empirical boundary per column: midpoint between the last stable row
    /// (counted contiguously from `sigma2 = 0`) and the next row. `None` when
    /// the column never becomes unstable on the grid.
    pub empirical: Vec<Option<f64>>,
    /// `m0^2 (2/(rho lambda) - 1)`.
    pub theory_slope: f64,
    pub lambda: f64,
    pub rho: f64,
    pub steps: usize,
    /// Trajectories per cell.
    pub trials: usize,
}

impl StabilityBoundary {
    pub fn fit(&self) -> Option<BoundaryFit> {
        let pts: Vec<(f64, f64)> = self
            .n_samples
            .iter()
            .zip(&self.empirical)
            .filter_map(|(&n, b)| b.map(|b| (n as f64, b)))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        let slope = sxy / sxx;
        let mean = pts.iter().map(|(_, y)| y).sum::<f64>() / pts.len() as f64;
        let ss_res: f64 = pts.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
        let ss_tot: f64 = pts.iter().map(|(_, y)| (y - mean).powi(2)).sum();
        let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        Some(BoundaryFit {
            slope,
            r_squared,
            points: pts.len(),
        })
    }

    /// Pairs violating monotonicity: a stable cell whose neighbour with one
    /// more sample is unstable, or an unstable cell with a stable cell above
    /// it at larger variance.
    pub fn monotonicity_violations(&self) -> usize {
        let rows = self.sigma2.len();
        let cols = self.n_samples.len();
        let mut count = 0;
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols && self.stable[r][c] && !self.stable[r][c + 1] {
                    count += 1;
                }
                if r + 1 < rows && !self.stable[r][c] && self.stable[r + 1][c] {
                    count += 1;
                }
            }
        }
        count
    }

    /// Neighbouring pairs whose unstable fractions order the wrong way by
    /// more than `z` standard errors of a pooled two-proportion test: more
    /// unstable with one more sample, or less unstable at larger variance.
    pub fn significant_violations(&self, z: f64) -> usize {
        let f = &self.unstable_fraction;
        let n = self.trials as f64;
        // `high` should be at least as unstable as `low`.
        let exceeds = |high: f64, low: f64| {
            let p = 0.5 * (high + low);
            low - high > z * (p * (1.0 - p) * 2.0 / n).sqrt()
        };
        let mut count = 0;
        for r in 0..f.len() {
            for c in 0..f[r].len() {
                if c + 1 < f[r].len() && exceeds(f[r][c], f[r][c + 1]) {
                    count += 1;
                }
                if r + 1 < f.len() && exceeds(f[r + 1][c], f[r][c]) {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Criteria used for the boundary: a cell is unstable when the mean loss of
/// the final quarter of the run is at least the initial loss. Below `2/rho`
/// the noisy iterate always has a bounded stationary law, so the default
/// `1e6` blow-up factor never triggers on a quadratic; mean-square growth is
/// the instability that the threshold predicts.
pub fn boundary_criteria() -> StabilityCriteria {
    StabilityCriteria {
        divergence_factor: 1.0,
        ..StabilityCriteria::default()
    }
}

fn scalar_run(lambda: f64, rho: f64, sigma2: f64, ns: usize, m0: f64, steps: usize, stream: &RandomStream) -> Result<StabilityClass> {
    let sd = sigma2.sqrt();
    let mut rng = stream.rng();
    let mut m = m0;
    let mut loss = Vec::with_capacity(steps + 1);
    let mut norm = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        loss.push(0.5 * lambda * m * m);
        norm.push(m.abs());
        if !m.is_finite() {
            break;
        }
        if t < steps {
            m = scalar_vgd_step(lambda, m, rho, sd, ns, &mut rng);
        }
    }
    if loss.len() < steps + 1 {
        return Ok(StabilityClass::Divergent);
    }
    classify_stability(&loss, &norm, &boundary_criteria())
}

/// Classifies 1-D variational GD runs over the `(N_s, sigma^2)` grid. The
/// `trials` runs of cell `(row, col)` use `stream.child(row).child(col).child(t)`;
/// a cell is stable when fewer than half of them are divergent.
pub fn stability_boundary(config: &GridExperimentConfig, steps: usize, stream: &RandomStream) -> Result<StabilityBoundary> {
    config.validate()?;
    config.expect_axes("n_samples", "sigma2")?;
    if steps < 8 {
        return Err(Error::spec("stability boundary needs at least 8 steps"));
    }
    if !(config.lambda > 0.0) {
        return Err(Error::spec("lambda must be positive"));
    }
    let n_samples: Vec<usize> = config
        .x
        .values()
        .iter()
        .map(|&v| {
            let r = v.round();
            if r < 1.0 || (v - r).abs() > 1e-9 {
                Err(Error::spec(format!("n_samples axis value {v} is not a positive integer")))
            } else {
                Ok(r as usize)
            }
        })
        .collect::<Result<_>>()?;
    let sigma2 = config.y.values();
    if sigma2.iter().any(|&s| s < 0.0) {
        return Err(Error::spec("sigma2 axis must be non-negative"));
    }
    let cols = n_samples.len();
    let cells: Vec<(usize, usize)> = (0..sigma2.len()).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    let fractions: Vec<f64> = cells
        .par_iter()
        .map(|&(r, c)| {
            let cell = stream.child(r as u64).child(c as u64);
            let mut divergent = 0usize;
            for t in 0..config.trials {
                let class = scalar_run(
                    config.lambda,
                    config.rho,
                    sigma2[r],
                    n_samples[c],
                    config.m0,
                    steps,
                    &cell.child(t as u64),
                )?;
                divergent += usize::from(class == StabilityClass::Divergent);
            }
            Ok(divergent as f64 / config.trials as f64)
        })
        .collect::<Result<_>>()?;
    let unstable_fraction: Vec<Vec<f64>> = fractions.chunks(cols).map(|c| c.to_vec()).collect();
    let stable: Vec<Vec<bool>> = unstable_fraction
        .iter()
        .map(|row| row.iter().map(|&f| f < 0.5).collect())
        .collect();
    let empirical = (0..cols)
        .map(|c| {
            let k = stable.iter().take_while(|row| row[c]).count();
            if k == sigma2.len() {
                None
            } else if k == 0 {
                Some(sigma2[0])
            } else {
                Some(0.5 * (sigma2[k - 1] + sigma2[k]))
            }
        })
        .collect();
    Ok(StabilityBoundary {
        n_samples,
        sigma2,
        stable,
        unstable_fraction,
        empirical,
        theory_slope: config.m0 * config.m0 * (2.0 / (config.rho * config.lambda) - 1.0),
        lambda: config.lambda,
        rho: config.rho,
        steps,
        trials: config.trials,
    })
}
