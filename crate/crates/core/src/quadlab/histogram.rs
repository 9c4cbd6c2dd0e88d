use serde::{Deserialize, Serialize};

use crate::numerics::RandomStream;
use crate::stability::scalar_vgd_step;
use crate::{Error, Result};

/// Fixed-range histogram. Samples outside the range are counted in the edge
/// bins so the counts always sum to `total`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::spec(format!("histogram needs bins >= 1 and lo < hi, got {bins}, [{lo}, {hi}]")));
        }
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
        edges[bins] = hi;
        Ok(Self {
            edges,
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let bins = self.counts.len();
        let lo = self.edges[0];
        let hi = self.edges[bins];
        let idx = ((x - lo) / (hi - lo) * bins as f64).floor();
        if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(bins - 1)
        }
    }

    pub fn add(&mut self, x: f64) {
        let b = self.bin_of(x);
        self.counts[b] += 1;
        self.total += 1;
    }

    /// Distance between the outermost non-empty bin edges.
    pub fn occupied_width(&self) -> f64 {
        let first = self.counts.iter().position(|&c| c > 0);
        let last = self.counts.iter().rposition(|&c| c > 0);
        match (first, last) {
            (Some(a), Some(b)) => self.edges[b + 1] - self.edges[a],
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateHistogram {
    pub histogram: Histogram,
    pub mean: f64,
    /// Sample variance of the kept iterates.
    pub variance: f64,
    /// Batch-means standard error of `variance`.
    pub variance_stderr: f64,
    pub min: f64,
    pub max: f64,
}

const BATCHES: usize = 50;

/// Post-burn-in iterates of 1-D variational GD on `l(m) = lambda/2 m^2`,
/// started at `m0`. Step `t` does not get its own child stream: the run is a
/// single sequential draw from `stream`.
#[allow(clippy::too_many_arguments)]
pub fn iterate_histogram(
    lambda: f64,
    rho: f64,
    sigma2: f64,
    n_samples: usize,
    m0: f64,
    steps: usize,
    burn_in: usize,
    range: (f64, f64),
    bins: usize,
    stream: &RandomStream,
) -> Result<IterateHistogram> {
    if steps <= burn_in {
        return Err(Error::Precondition(format!("steps {steps} must exceed burn-in {burn_in}")));
    }
    if n_samples == 0 || !(sigma2 >= 0.0) || !(rho > 0.0) {
        return Err(Error::spec("histogram run needs N_s >= 1, sigma2 >= 0, rho > 0"));
    }
    let mut hist = Histogram::new(range.0, range.1, bins)?;
    let sd = sigma2.sqrt();
    let mut rng = stream.rng();
    let mut m = m0;
    let mut kept = Vec::with_capacity(steps - burn_in);
    for t in 0..steps {
        m = scalar_vgd_step(lambda, m, rho, sd, n_samples, &mut rng);
        if !m.is_finite() || m.abs() > 1e150 {
            return Err(Error::Divergent(format!(
                "iterate reached {m} at step {t} (lambda={lambda}, rho={rho}, sigma2={sigma2}, N_s={n_samples})"
            )));
        }
        if t >= burn_in {
            hist.add(m);
            kept.push(m);
        }
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let dev2: Vec<f64> = kept.iter().map(|x| (x - mean).powi(2)).collect();
    let variance = dev2.iter().sum::<f64>() / (n - 1.0).max(1.0);
    let batches = BATCHES.min(kept.len());
    let per = kept.len() / batches;
    let batch_means: Vec<f64> = (0..batches)
        .map(|b| dev2[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let bm = batch_means.iter().sum::<f64>() / batches as f64;
    let bvar = batch_means.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (batches as f64 - 1.0).max(1.0);
    let variance_stderr = (bvar / batches as f64).sqrt();
    Ok(IterateHistogram {
        histogram: hist,
        mean,
        variance,
        variance_stderr,
        min: kept.iter().cloned().fold(f64::INFINITY, f64::min),
        max: kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}
