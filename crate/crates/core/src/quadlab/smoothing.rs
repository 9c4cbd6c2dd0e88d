//! Gaussian smoothing of the quartic `l(theta) = (theta^2 - 1)^2`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::RandomStream;
use crate::{Error, Result};

pub fn quartic_loss(theta: f64) -> f64 {
    (theta * theta - 1.0).powi(2)
}

/// `E[l(m + eps)]` with `eps ~ N(0, sigma2)` and its second derivative in `m`:
///
/// `m^4 + m^2 (6 sigma^2 - 2) + (3 sigma^4 - 2 sigma^2 + 1)`, curvature `12 m^2 - 4 + 12 sigma^2`.
pub fn smoothed_quartic(m: f64, sigma2: f64) -> (f64, f64) {
    let m2 = m * m;
    let value = m2 * m2 + m2 * (6.0 * sigma2 - 2.0) + (3.0 * sigma2 * sigma2 - 2.0 * sigma2 + 1.0);
    let curvature = 12.0 * m2 - 4.0 + 12.0 * sigma2;
    (value, curvature)
}

/// Positive minimiser `sqrt(1 - 3 sigma^2)` of the smoothed quartic; `None`
/// once `sigma^2 >= 1/3`, where the two wells have merged at zero.
pub fn smoothed_minimizer(sigma2: f64) -> Option<f64> {
    let s = 1.0 - 3.0 * sigma2;
    (s > 0.0).then(|| s.sqrt())
}

/// One finite-sample realisation of the averaged curvature
/// `(1/N) sum_i l''(theta + eps_i) = (1/N) sum_i (12 (theta + eps_i)^2 - 4)`.
pub fn averaged_curvature_mc<R: Rng + ?Sized>(theta: f64, sigma2: f64, n_samples: usize, rng: &mut R) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Precondition("averaged curvature needs n_samples >= 1".into()));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::spec(format!("negative variance {sigma2}")));
    }
    let sd = sigma2.sqrt();
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let z: f64 = rng.sample(StandardNormal);
        let x = theta + sd * z;
        acc += 12.0 * x * x - 4.0;
    }
    Ok(acc / n_samples as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePoint {
    pub n_samples: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `mean`.
    pub stderr: f64,
}

/// Mean and variance of [`averaged_curvature_mc`] over `realizations`
/// independent draws for each sample count. Realisation `r` at list position
/// `i` uses `stream.child(i).child(r)`.
pub fn curvature_concentration(
    theta: f64,
    sigma2: f64,
    n_samples_list: &[usize],
    realizations: usize,
    stream: &RandomStream,
) -> Result<Vec<CurvaturePoint>> {
    if realizations < 2 {
        return Err(Error::Precondition("need at least two realizations".into()));
    }
    n_samples_list
        .iter()
        .enumerate()
        .map(|(i, &ns)| {
            let base = stream.child(i as u64);
            let draws: Vec<f64> = (0..realizations)
                .into_par_iter()
                .map(|r| averaged_curvature_mc(theta, sigma2, ns, &mut base.child(r as u64).rng()))
                .collect::<Result<_>>()?;
            let n = draws.len() as f64;
            let mean = draws.iter().sum::<f64>() / n;
            let variance = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(CurvaturePoint {
                n_samples: ns,
                mean,
                variance,
                stderr: (variance / n).sqrt(),
            })
        })
        .collect()
}

/// Least-squares slope of `log variance` against `log N_s`.
pub fn loglog_slope(points: &[CurvaturePoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.variance > 0.0)
        .map(|p| ((p.n_samples as f64).ln(), p.variance.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}
