use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GridExperimentConfig;
use crate::numerics::RandomStream;
use crate::stability::{descent_probability_mc, stability_threshold};
use crate::{Error, Result};

/// Threshold curve of the descent heatmap at one column.
///
/// On `l(m) = lambda/2 m^2` the mode statistic is `z = N_s (lambda m0)^2 / sigma^2`,
/// which itself depends on `lambda`. The curve is the self-consistent
/// solution of `lambda = (2/rho) VF(z(lambda))`, found by bisection. It
/// coincides with the zero of the exact expected one-step change.
pub fn theory_threshold(inverse_variance: f64, m0: f64, n_samples: usize, rho: f64) -> Result<f64> {
    if !(inverse_variance > 0.0) || n_samples == 0 || !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "theory threshold needs 1/sigma^2 > 0, N_s >= 1, rho > 0; got {inverse_variance}, {n_samples}, {rho}"
        )));
    }
    let gd = 2.0 / rho;
    if inverse_variance.is_infinite() {
        return Ok(gd);
    }
    if m0 == 0.0 {
        return Ok(0.0);
    }
    let ns = n_samples as f64;
    let h = |lambda: f64| -> Result<f64> {
        let z = ns * (lambda * m0).powi(2) * inverse_variance;
        Ok(lambda - stability_threshold(z, rho)?)
    };
    let (mut lo, mut hi) = (0.0, gd);
    if h(hi)? <= 0.0 {
        return Ok(gd);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentHeatmap {
    /// Column coordinates `1/sigma^2`.
    pub inverse_variance: Vec<f64>,
    /// Row coordinates.
    pub lambda: Vec<f64>,
    /// `probability[row][col]`.
    pub probability: Vec<Vec<f64>>,
    pub theory_lambda: Vec<f64>,
    /// Empirical 0.5 crossing per column; see [`DescentHeatmap::contour_lambda`].
    pub contour_lambda: Vec<f64>,
    pub rho: f64,
    pub n_samples: usize,
    pub m0: f64,
    pub trials: usize,
}

impl DescentHeatmap {
    pub fn rows(&self) -> usize {
        self.lambda.len()
    }

    pub fn cols(&self) -> usize {
        self.inverse_variance.len()
    }

    /// Row spacing, assuming a linear lambda axis.
    pub fn cell_height(&self) -> f64 {
        (self.lambda[self.rows() - 1] - self.lambda[0]) / (self.rows() - 1) as f64
    }

    /// Cells with probability at least 0.5.
    pub fn binarized(&self) -> Vec<Vec<bool>> {
        self.probability
            .iter()
            .map(|row| row.iter().map(|&p| p >= 0.5).collect())
            .collect()
    }

    /// Fraction of columns whose empirical crossing lies within `cells` grid
    /// rows of the theory curve.
    pub fn contour_agreement(&self, cells: f64) -> f64 {
        let tol = cells * self.cell_height();
        let hits = self
            .contour_lambda
            .iter()
            .zip(&self.theory_lambda)
            .filter(|(c, t)| (*c - *t).abs() <= tol)
            .count();
        hits as f64 / self.cols() as f64
    }
}

/// The crossing is placed between row `k-1` and row `k`, where `k` is the
/// number of rows in the column with probability at least 0.5. Descent
/// probability falls with `lambda`, so `k` counts the rows below the
/// transition.
fn contour_from_column(lambda: &[f64], column: &[f64]) -> f64 {
    let n = lambda.len();
    let k = column.iter().filter(|&&p| p >= 0.5).count();
    let h = (lambda[n - 1] - lambda[0]) / (n - 1) as f64;
    match k {
        0 => lambda[0] - 0.5 * h,
        k if k == n => lambda[n - 1] + 0.5 * h,
        k => 0.5 * (lambda[k - 1] + lambda[k]),
    }
}

/// Descent probability on the `(1/sigma^2, lambda)` grid. Cell `(row, col)`
/// uses `stream.child(row).child(col)`.
pub fn descent_heatmap(config: &GridExperimentConfig, stream: &RandomStream) -> Result<DescentHeatmap> {
    config.validate()?;
    config.expect_axes("inverse_variance", "lambda")?;
    if config.n_samples == 0 {
        return Err(Error::spec("descent heatmap needs n_samples >= 1"));
    }
    let xs = config.x.values();
    let ys = config.y.values();
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::spec("inverse variance axis must be positive"));
    }
    let cells: Vec<(usize, usize)> = (0..ys.len()).flat_map(|r| (0..xs.len()).map(move |c| (r, c))).collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(r, c)| {
            let cell = stream.child(r as u64).child(c as u64);
            descent_probability_mc(
                ys[r],
                config.m0,
                config.rho,
                1.0 / xs[c],
                config.n_samples,
                config.trials,
                &cell,
            )
            .map(|e| e.probability)
        })
        .collect::<Result<_>>()?;
    let probability: Vec<Vec<f64>> = flat.chunks(xs.len()).map(|c| c.to_vec()).collect();
    let theory_lambda = xs
        .iter()
        .map(|&x| theory_threshold(x, config.m0, config.n_samples, config.rho))
        .collect::<Result<_>>()?;
    let contour_lambda = (0..xs.len())
        .map(|c| {
            let column: Vec<f64> = probability.iter().map(|row| row[c]).collect();
            contour_from_column(&ys, &column)
        })
        .collect();
    Ok(DescentHeatmap {
        inverse_variance: xs,
        lambda: ys,
        probability,
        theory_lambda,
        contour_lambda,
        rho: config.rho,
        n_samples: config.n_samples,
        m0: config.m0,
        trials: config.trials,
    })
}
