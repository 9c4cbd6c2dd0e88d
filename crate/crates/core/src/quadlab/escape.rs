use serde::{Deserialize, Serialize};

use crate::numerics::RandomStream;
use crate::stability::{perturbed_gradient, PosteriorSpec};
use crate::{Objective, Result};

/// `l(theta) = (theta^2 - 1)^2 (1 + 0.8 theta)` on `[-1.2, 2.0]`.
///
/// Minima at `+1` (curvature 14.4) and `-1` (curvature 1.6), separated by a
/// barrier at `theta = (-1 + sqrt(1.8)) / 2`. The flat well is only closed on
/// the left by a low ridge near `-1.171`; beyond the domain the loss turns
/// negative, so leaving it counts as divergence.
#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleWell;

impl DoubleWell {
    pub const TILT: f64 = 0.8;
    pub const DOMAIN: (f64, f64) = (-1.2, 2.0);
    pub const SHARP_MINIMUM: f64 = 1.0;
    pub const FLAT_MINIMUM: f64 = -1.0;

    pub fn value(theta: f64) -> f64 {
        (theta * theta - 1.0).powi(2) * (1.0 + Self::TILT * theta)
    }

    /// `(theta^2 - 1)(4 theta^2 + 4 theta - 0.8)`
    pub fn derivative(theta: f64) -> f64 {
        (theta * theta - 1.0) * (4.0 * theta * theta + 4.0 * theta - Self::TILT)
    }

    pub fn curvature(theta: f64) -> f64 {
        let t2 = theta * theta;
        2.0 * theta * (4.0 * t2 + 4.0 * theta - Self::TILT) + (t2 - 1.0) * (8.0 * theta + 4.0)
    }

    /// Local maximum between the two minima.
    pub fn barrier() -> f64 {
        (-4.0 + (16.0 + 16.0 * Self::TILT).sqrt()) / 8.0
    }

    pub fn in_domain(theta: f64) -> bool {
        theta >= Self::DOMAIN.0 && theta <= Self::DOMAIN.1
    }
}

impl Objective for DoubleWell {
    fn dim(&self) -> usize {
        1
    }

    fn loss(&self, params: &[f64]) -> f64 {
        Self::value(params[0])
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        vec![Self::derivative(params[0])]
    }

    fn hvp(&self, params: &[f64], direction: &[f64]) -> Vec<f64> {
        vec![Self::curvature(params[0]) * direction[0]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basin {
    Sharp,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRun {
    /// Iterates from `m0` up to the final (or first out-of-domain) value.
    pub iterates: Vec<f64>,
    pub losses: Vec<f64>,
    /// `None` when the run left the domain.
    pub basin: Option<Basin>,
    pub divergent: bool,
}

/// Variational GD on [`DoubleWell`]. Step `t` draws its perturbations from
/// `stream.child(t)`; with `sigma2 = 0` the run is plain GD.
pub fn double_well_escape(
    rho: f64,
    sigma2: f64,
    n_samples: usize,
    steps: usize,
    m0: f64,
    stream: &RandomStream,
) -> Result<EscapeRun> {
    let spec = PosteriorSpec::isotropic(1, sigma2, n_samples)?;
    let sampler = spec.sampler()?;
    let mut m = m0;
    let mut iterates = vec![m];
    let mut losses = vec![DoubleWell::value(m)];
    let mut divergent = !DoubleWell::in_domain(m);
    for t in 0..steps {
        if divergent {
            break;
        }
        let g = perturbed_gradient(&DoubleWell, &[m], &sampler, n_samples, &mut stream.child(t as u64).rng())?;
        m -= rho * g[0];
        iterates.push(m);
        losses.push(DoubleWell::value(m));
        divergent = !m.is_finite() || !DoubleWell::in_domain(m);
    }
    let basin = (!divergent).then(|| {
        if m > DoubleWell::barrier() {
            Basin::Sharp
        } else {
            Basin::Flat
        }
    });
    Ok(EscapeRun {
        iterates,
        losses,
        basin,
        divergent,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeSummary {
    pub runs: usize,
    pub sharp: usize,
    pub flat: usize,
    pub divergent: usize,
}

impl EscapeSummary {
    pub fn escape_frequency(&self) -> f64 {
        self.flat as f64 / self.runs as f64
    }
}

/// Basin counts over `runs` seeded runs; run `r` uses `stream.child(r)`.
pub fn escape_frequency(
    rho: f64,
    sigma2: f64,
    n_samples: usize,
    steps: usize,
    m0: f64,
    runs: usize,
    stream: &RandomStream,
) -> Result<EscapeSummary> {
    use rayon::prelude::*;
    let outcomes: Vec<EscapeRun> = (0..runs)
        .into_par_iter()
        .map(|r| double_well_escape(rho, sigma2, n_samples, steps, m0, &stream.child(r as u64)))
        .collect::<Result<_>>()?;
    let mut s = EscapeSummary {
        runs,
        ..Default::default()
    };
    for o in &outcomes {
        match o.basin {
            Some(Basin::Sharp) => s.sharp += 1,
            Some(Basin::Flat) => s.flat += 1,
            None => s.divergent += 1,
        }
    }
    Ok(s)
}
