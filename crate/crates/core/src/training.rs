//! Measured training of the MLP with any of the update rules.
//!
//! Every `log_every` steps (and after the last step) the loop measures, at the
//! mean iterate: full-batch loss, train/test accuracy, gradient norm, the top
//! Hessian eigenpairs, per-mode thresholds, the normalised sharpness with its
//! predicted VF, the preconditioned sharpness (Adam, IVON) and the variational
//! objective (Gaussian VGD, IVON).
//!
//! Random streams hang off the master seed as follows: `0` initial weights,
//! `1` data, `2` batch order, `3/t` update noise at step `t`, `4/t` Lanczos
//! start vector, `5/t` ELBO draws.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    hessian_top_eigen, hypothesis_tracker, preconditioned_top_eigen, spectrum_vs_thresholds, Trajectory, TrajectoryRow,
};
use crate::models::{load_csv_dataset, synth_dataset, Activation, BatchSchedule, Dataset, MlpModel, MlpObjective};
use crate::numerics::{norm, RandomStream};
use crate::optimizers::{
    adam_step, elbo_estimate, gd_step, ivon_step, vgd_step, AdamState, GdState, VgdState, VonState,
};
use crate::stability::PosteriorSpec;
use crate::{Error, Objective, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Gd,
    Vgd,
    Adam,
    Ivon,
}

/// Where the training data comes from. With `csv` set the synthetic fields
/// are ignored and no test split is made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub classes: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub input_dim: usize,
    pub separation: f64,
    pub csv: Option<PathBuf>,
    pub label_column: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            per_class: 64,
            test_per_class: 64,
            input_dim: 16,
            separation: 2.0,
            csv: None,
            label_column: "label".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub rho: f64,
    /// Perturbation variance for VGD.
    pub sigma2: f64,
    pub n_samples: usize,
    /// Student-t tail index for VGD; Gaussian when absent.
    pub alpha: Option<f64>,
    /// Multiplies the VGD variance; the IVON posterior is `N(m, tau P^-1)`.
    pub temperature: f64,
    /// Adam second-moment EMA factor (weight on the old value).
    pub beta2: f64,
    /// VON/IVON precision EMA weight on the new Hessian estimate.
    pub von_beta2: f64,
    pub init_precision: f64,
    pub steps: u64,
    /// Zero means full batch.
    pub batch_size: usize,
    pub log_every: u64,
    pub hidden: Vec<usize>,
    /// Gain on the `1/sqrt(fan_in)` uniform initialisation.
    pub init_scale: f64,
    pub eigen_k: usize,
    pub eigen_max_iters: usize,
    pub eigen_tol: f64,
    /// Posterior draws per ELBO estimate; zero disables it.
    pub elbo_samples: usize,
    pub data: DataConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Gd,
            rho: 0.05,
            sigma2: 0.0,
            n_samples: 1,
            alpha: None,
            temperature: 1.0,
            beta2: 0.999,
            von_beta2: 1e-3,
            init_precision: 1.0,
            steps: 2000,
            batch_size: 0,
            log_every: 10,
            hidden: vec![64, 64],
            init_scale: 1.0,
            eigen_k: 1,
            eigen_max_iters: 200,
            eigen_tol: 1e-6,
            elbo_samples: 0,
            data: DataConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, empty when the config is runnable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            v.push(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            v.push(format!("sigma2 must be finite and non-negative, got {}", self.sigma2));
        }
        if self.n_samples == 0 {
            v.push("n_samples must be at least 1".into());
        }
        if let Some(a) = self.alpha {
            if !(a > 2.0) {
                v.push(format!("alpha must exceed 2, got {a}"));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            v.push(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            v.push(format!("beta2 must lie in [0, 1), got {}", self.beta2));
        }
        if !(0.0..=1.0).contains(&self.von_beta2) {
            v.push(format!("von_beta2 must lie in [0, 1], got {}", self.von_beta2));
        }
        if !(self.init_precision > 0.0 && self.init_precision.is_finite()) {
            v.push(format!("init_precision must be positive, got {}", self.init_precision));
        }
        if self.log_every == 0 {
            v.push("log_every must be at least 1".into());
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            v.push(format!("init_scale must be positive, got {}", self.init_scale));
        }
        if self.hidden.contains(&0) {
            v.push("hidden layer widths must be positive".into());
        }
        if self.eigen_k == 0 || self.eigen_k > crate::diagnostics::MAX_K {
            v.push(format!("eigen_k must lie in 1..={}", crate::diagnostics::MAX_K));
        }
        if self.eigen_max_iters < self.eigen_k {
            v.push("eigen_max_iters must be at least eigen_k".into());
        }
        if !(self.eigen_tol > 0.0) {
            v.push("eigen_tol must be positive".into());
        }
        let d = &self.data;
        if d.csv.is_none() {
            if d.classes < 2 {
                v.push("data.classes must be at least 2".into());
            }
            if d.per_class == 0 {
                v.push("data.per_class must be at least 1".into());
            }
            if d.input_dim < d.classes {
                v.push("data.input_dim must be at least data.classes".into());
            }
            if !(d.separation >= 0.0 && d.separation.is_finite()) {
                v.push("data.separation must be finite and non-negative".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().as_slice() {
            [] => Ok(()),
            list => Err(Error::Config(list.join("; "))),
        }
    }

    fn perturbation(&self, dim: usize) -> Result<PosteriorSpec> {
        let spec = match self.alpha {
            Some(alpha) => PosteriorSpec::student_t(dim, self.sigma2, self.n_samples, alpha)?,
            None => PosteriorSpec::isotropic(dim, self.sigma2, self.n_samples)?,
        };
        spec.with_temperature(self.temperature)
    }
}

/// Train/test split used by a run.
#[derive(Clone, Debug)]
pub struct TrainData {
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub warnings: Vec<String>,
}

pub fn load_train_data(config: &DataConfig, stream: &RandomStream) -> Result<TrainData> {
    if let Some(path) = &config.csv {
        let csv = load_csv_dataset(path, &config.label_column)?;
        return Ok(TrainData {
            train: csv.dataset,
            test: None,
            warnings: csv.warnings,
        });
    }
    let train = synth_dataset(config.classes, config.per_class, config.input_dim, config.separation, &stream.child(0))?;
    let test = if config.test_per_class > 0 {
        Some(synth_dataset(
            config.classes,
            config.test_per_class,
            config.input_dim,
            config.separation,
            &stream.child(1),
        )?)
    } else {
        None
    };
    Ok(TrainData {
        train,
        test,
        warnings: Vec::new(),
    })
}

enum State {
    Gd(GdState),
    Vgd(VgdState),
    Adam(AdamState),
    Ivon(VonState),
}

impl State {
    fn mean(&self) -> &[f64] {
        match self {
            State::Gd(s) => &s.mean,
            State::Vgd(s) => &s.mean,
            State::Adam(s) => &s.mean,
            State::Ivon(s) => &s.mean,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub rows: Vec<TrajectoryRow>,
    pub final_params: Vec<f64>,
    pub diverged: bool,
    /// Steps actually taken.
    pub steps: u64,
    pub warnings: Vec<String>,
}

impl TrainOutcome {
    pub fn final_sharpness(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.sharpness)
    }

    /// Mean of a per-row quantity over rows with `step >= from`.
    pub fn tail_mean(&self, from: u64, f: impl Fn(&TrajectoryRow) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter(|r| r.step >= from).filter_map(f).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// Time average of `|normalised sharpness - VF|` over rows with
    /// `step >= from`.
    pub fn tracking_gap(&self, from: u64) -> Option<f64> {
        self.tail_mean(from, |r| Some((r.normalized_sharpness? - r.vf?).abs()))
    }
}

/// Loss threshold, relative to the initial loss, beyond which a run counts
/// as divergent.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Runs one configuration, streaming rows into `trajectory`.
pub fn train(config: &TrainConfig, seed: u64, trajectory: &mut Trajectory) -> Result<TrainOutcome> {
    config.validate()?;
    let root = RandomStream::new(seed);
    let data = load_train_data(&config.data, &root.child(1))?;
    let mut dims = vec![data.train.input_dim()];
    dims.extend(&config.hidden);
    dims.push(data.train.classes);
    let model = MlpModel::with_init_scale(&dims, Activation::Tanh, config.init_scale, &root.child(0))?;
    let full = MlpObjective::new(&model, &data.train)?;
    let d = model.num_params();
    let schedule = BatchSchedule::new(data.train.len(), config.batch_size, root.child(2));
    let init = model.params.clone();

    let mut state = match config.optimizer {
        OptimizerKind::Gd => State::Gd(GdState::new(init, config.rho)),
        OptimizerKind::Vgd => State::Vgd(VgdState::new(init, config.perturbation(d)?, config.rho)?),
        OptimizerKind::Adam => State::Adam(AdamState::new(init, config.rho, config.beta2)?),
        OptimizerKind::Ivon => State::Ivon(VonState::new(
            init,
            vec![config.init_precision; d],
            config.rho,
            config.von_beta2,
            config.temperature,
            config.n_samples,
        )?),
    };

    let initial_loss = full.loss(state.mean());
    let mut warnings = data.warnings.clone();
    let mut diverged = false;
    let mut all_clamped = false;
    let mut step = 0;
    loop {
        let measure = step % config.log_every == 0 || step == config.steps;
        if measure {
            let mut row = measure_row(config, &model, &data, &full, &state, step, &root)?;
            if all_clamped {
                row.flag("precision_all_clamped");
            }
            let loss = row.loss.unwrap_or(f64::NAN);
            if !(loss.is_finite() && loss <= DIVERGENCE_FACTOR * initial_loss.max(1e-12)) {
                diverged = true;
                row.flag("divergent");
            }
            trajectory.record_step(row)?;
        }
        if diverged || step == config.steps {
            break;
        }
        let batch_data;
        let batch_obj;
        let obj: &MlpObjective = if schedule.is_full_batch() {
            &full
        } else {
            batch_data = data.train.subset(&schedule.batch_at(step).indices);
            batch_obj = MlpObjective::new(&model, &batch_data)?;
            &batch_obj
        };
        let noise = root.child(3).child(step);
        let result = match &mut state {
            State::Gd(s) => gd_step(s, obj),
            State::Vgd(s) => vgd_step(s, obj, &noise).map(|_| ()),
            State::Adam(s) => adam_step(s, obj),
            State::Ivon(s) => ivon_step(s, obj, &noise).map(|info| {
                all_clamped = info.all_clamped;
            }),
        };
        step += 1;
        match result {
            Ok(()) if state.mean().iter().all(|v| v.is_finite()) => {}
            Ok(()) | Err(Error::NonFinite { .. }) => {
                let mut row = TrajectoryRow::new(step);
                row.flag("divergent");
                trajectory.record_step(row)?;
                warnings.push(format!("run diverged at step {step}"));
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainOutcome {
        rows: trajectory.rows().to_vec(),
        final_params: state.mean().to_vec(),
        diverged,
        steps: step,
        warnings,
    })
}

fn measure_row(
    config: &TrainConfig,
    model: &MlpModel,
    data: &TrainData,
    full: &MlpObjective,
    state: &State,
    step: u64,
    root: &RandomStream,
) -> Result<TrajectoryRow> {
    let mean = state.mean();
    let mut row = TrajectoryRow::new(step);
    let (loss, grad) = full.loss_and_gradient(mean);
    row.loss = Some(loss);
    row.grad_norm = Some(norm(&grad));
    if !(loss.is_finite() && grad.iter().all(|g| g.is_finite())) {
        return Ok(row);
    }
    row.train_accuracy = Some(model.accuracy(mean, &data.train)?);
    if let Some(test) = &data.test {
        row.test_accuracy = Some(model.accuracy(mean, test)?);
    }
    let d = mean.len();
    let spectrum = match hessian_top_eigen(
        full,
        mean,
        config.eigen_k.min(d),
        config.eigen_max_iters,
        config.eigen_tol,
        &root.child(4).child(step),
    ) {
        Ok(s) => s,
        Err(Error::NonFinite { .. }) => {
            row.flag("non_finite:sharpness");
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    if !spectrum.converged {
        row.flag("eigen_unconverged");
    }
    row.sharpness = Some(spectrum.values[0]);
    row.top_eigenvalues = spectrum.values.iter().map(|&v| Some(v)).collect();

    let spec = match state {
        State::Vgd(s) => s.spec.clone(),
        State::Ivon(s) => PosteriorSpec::diagonal(s.posterior_variance(), s.n_samples)?,
        _ => PosteriorSpec::noiseless(d),
    };
    let modes = spectrum_vs_thresholds(&spectrum, &grad, config.rho, &spec)?;
    row.thresholds = modes.iter().map(|m| Some(m.threshold)).collect();
    let point = hypothesis_tracker(&spectrum, &grad, config.rho, &spec)?;
    row.normalized_sharpness = Some(point.normalized_sharpness);
    row.vf = Some(point.vf);
    if point.clamped {
        row.flag("z_clamped");
    }

    let precond = match state {
        State::Adam(s) if s.t > 0 => Some(s.preconditioner()),
        State::Ivon(s) => Some(s.precision.clone()),
        _ => None,
    };
    if let Some(p) = precond {
        let r = preconditioned_top_eigen(
            |v| full.hvp(mean, v),
            &p,
            1,
            config.eigen_max_iters,
            config.eigen_tol,
            &root.child(4).child(step).child(1),
        )?;
        if !r.converged {
            row.flag("eigen_unconverged");
        }
        row.preconditioned_sharpness = Some(r.values[0]);
    }

    if config.elbo_samples > 0 {
        let q = match state {
            State::Vgd(s) if config.alpha.is_none() && !s.spec.is_noiseless() => {
                Some(PosteriorSpec::isotropic(d, config.sigma2, config.elbo_samples)?.with_temperature(config.temperature)?)
            }
            State::Ivon(s) => Some(PosteriorSpec::diagonal(s.posterior_variance(), config.elbo_samples)?),
            _ => None,
        };
        if let Some(q) = q {
            match elbo_estimate(mean, &q, full, &root.child(5).child(step)) {
                Ok(e) => row.elbo = Some(e.objective),
                Err(Error::NonFinite { .. }) => row.elbo = Some(f64::NAN),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(row)
}

/// Runs several configurations in parallel, each with its own in-memory
/// trajectory. Results come back in input order.
pub fn train_many(configs: &[TrainConfig], seed: u64) -> Vec<Result<TrainOutcome>> {
    configs
        .par_iter()
        .map(|c| train(c, seed, &mut Trajectory::in_memory()))
        .collect()
}
