//! One runner per experiment kind. Each writes its data files into an
//! [`OutputDir`] and returns run-level flags and warnings.
//!
//! Artifacts per kind:
//!
//! | kind | files |
//! |------|-------|
//! | quad-heatmap | `heatmap.csv`, `theory_curve.csv`, `summary.json` |
//! | stability-boundary | `unstable_fraction.csv`, `boundary.csv`, `summary.json` |
//! | quad-histogram | `histogram.csv`, `variance.csv` |
//! | quad-trajectory | `trajectory.jsonl`, `summary.json` |
//! | smoothing | `concentration.csv`, `smoothed.csv`, `summary.json` |
//! | escape | `escape.csv` |
//! | train | `trajectory.jsonl`, `trajectory.csv`, `summary.json` |
//! | spectrum | `trajectory.jsonl`, `spectrum.csv`, `summary.json` |
//! | von-compare | `adam.jsonl`, `ivon.jsonl`, `summary.json` |
//! | elbo-sweep | `elbo_<i>.jsonl` per variance, `summary.csv` |

use serde::Serialize;

use super::artifacts::{opt_float, OutputDir};
use super::params::{
    BoundaryParams, ElboSweepParams, EscapeParams, HeatmapParams, HistogramParams, QuadTrajectoryParams,
    SmoothingParams, VonCompareParams,
};
use super::Params;
use crate::diagnostics::{format_float, write_trajectory_csv, Trajectory, TrajectoryRow};
use crate::numerics::RandomStream;
use crate::quadlab::{
    curvature_concentration, descent_heatmap, escape_frequency, iterate_histogram, loglog_slope,
    run_quadratic_trajectory, smoothed_minimizer, smoothed_quartic, stability_boundary, QuadOptimizer,
};
use crate::stability::{PosteriorSpec, QuadraticProblem};
use crate::training::{train, TrainConfig, TrainOutcome};
use crate::Result;

#[derive(Debug, Default)]
pub(crate) struct RunNotes {
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
}

pub(crate) fn run_params(params: &Params, seed: u64, out: &mut OutputDir) -> Result<RunNotes> {
    let stream = RandomStream::new(seed);
    match params {
        Params::QuadHeatmap(p) => heatmap(p, seed, &stream, out),
        Params::StabilityBoundary(p) => boundary(p, seed, &stream, out),
        Params::QuadHistogram(p) => histogram(p, &stream, out),
        Params::QuadTrajectory(p) => quad_trajectory(p, &stream, out),
        Params::Smoothing(p) => smoothing(p, &stream, out),
        Params::Escape(p) => escape(p, &stream, out),
        Params::Train(p) => train_run(p, seed, out),
        Params::Spectrum(p) => spectrum(p, seed, out),
        Params::VonCompare(p) => von_compare(p, seed, out),
        Params::ElboSweep(p) => elbo_sweep(p, seed, out),
    }
}

fn heatmap(p: &HeatmapParams, seed: u64, stream: &RandomStream, out: &mut OutputDir) -> Result<RunNotes> {
    let h = descent_heatmap(&p.grid(seed), stream)?;
    out.write_matrix("heatmap.csv", "lambda\\inverse_variance", &h.inverse_variance, &h.lambda, |r, c| {
        format_float(h.probability[r][c])
    })?;
    let rows = h.inverse_variance.iter().enumerate().map(|(c, &x)| {
        vec![
            format_float(x),
            format_float(1.0 / x),
            format_float(h.theory_lambda[c]),
            format_float(h.contour_lambda[c]),
        ]
    });
    out.write_csv(
        "theory_curve.csv",
        &["inverse_variance", "sigma2", "theory_lambda", "contour_lambda"],
        rows,
    )?;
    #[derive(Serialize)]
    struct Summary {
        rows: usize,
        cols: usize,
        contour_agreement_one_cell: f64,
    }
    out.write_json(
        "summary.json",
        &Summary {
            rows: h.rows(),
            cols: h.cols(),
            contour_agreement_one_cell: h.contour_agreement(1.0),
        },
    )?;
    Ok(RunNotes::default())
}

fn boundary(p: &BoundaryParams, seed: u64, stream: &RandomStream, out: &mut OutputDir) -> Result<RunNotes> {
    let b = stability_boundary(&p.grid(seed), p.steps, stream)?;
    let cols: Vec<f64> = b.n_samples.iter().map(|&n| n as f64).collect();
    out.write_matrix("unstable_fraction.csv", "sigma2\\n_samples", &cols, &b.sigma2, |r, c| {
        format_float(b.unstable_fraction[r][c])
    })?;
    let rows = b.n_samples.iter().zip(&b.empirical).map(|(&n, e)| {
        vec![n.to_string(), opt_float(*e), format_float(b.theory_slope * n as f64)]
    });
    out.write_csv("boundary.csv", &["n_samples", "empirical_sigma2", "theory_sigma2"], rows)?;
    #[derive(Serialize)]
    struct Summary {
        theory_slope: f64,
        fit_slope: Option<f64>,
        fit_r_squared: Option<f64>,
        fit_points: usize,
        monotonicity_violations: usize,
        significant_violations: usize,
    }
    let fit = b.fit();
    out.write_json(
        "summary.json",
        &Summary {
            theory_slope: b.theory_slope,
            fit_slope: fit.map(|f| f.slope),
            fit_r_squared: fit.map(|f| f.r_squared),
            fit_points: fit.map_or(0, |f| f.points),
            monotonicity_violations: b.monotonicity_violations(),
            significant_violations: b.significant_violations(3.0),
        },
    )?;
    Ok(RunNotes::default())
}

fn histogram(p: &HistogramParams, stream: &RandomStream, out: &mut OutputDir) -> Result<RunNotes> {
    use rayon::prelude::*;
    let runs = p
        .n_samples
        .par_iter()
        .enumerate()
        .map(|(i, &ns)| {
            iterate_histogram(
                p.lambda,
                p.rho,
                p.sigma2,
                ns,
                p.m0,
                p.steps,
                p.burn_in,
                (p.range[0], p.range[1]),
                p.bins,
                &stream.child(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string()];
    header.extend(p.n_samples.iter().map(|n| format!("count_n{n}")));
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let edges = &runs[0].histogram.edges;
    let rows = (0..p.bins).map(|b| {
        let mut row = vec![format_float(edges[b]), format_float(edges[b + 1])];
        row.extend(runs.iter().map(|r| r.histogram.counts[b].to_string()));
        row
    });
    out.write_csv("histogram.csv", &header_ref, rows)?;
    let rows = p.n_samples.iter().zip(&runs).map(|(n, r)| {
        vec![
            n.to_string(),
            format_float(r.mean),
            format_float(r.variance),
            format_float(r.variance_stderr),
            format_float(r.min),
            format_float(r.max),
        ]
    });
    out.write_csv(
        "variance.csv",
        &["n_samples", "mean", "variance", "variance_stderr", "min", "max"],
        rows,
    )?;
    Ok(RunNotes::default())
}

/// One logged step of a quadratic run. Infinite `z` (noiseless modes) is
/// written as `null`.
#[derive(Serialize)]
struct QuadRow {
    step: usize,
    loss: f64,
    iterate_norm: f64,
    eigenvalues: Vec<f64>,
    z: Vec<Option<f64>>,
    thresholds: Vec<f64>,
    margins: Vec<f64>,
    flags: Vec<String>,
}

fn quad_trajectory(p: &QuadTrajectoryParams, stream: &RandomStream, out: &mut OutputDir) -> Result<RunNotes> {
    let problem = if p.rotate {
        QuadraticProblem::random_rotation(&p.eigenvalues, &mut stream.child(0).rng())?
    } else {
        QuadraticProblem::diagonal(&p.eigenvalues)?
    };
    let d = p.eigenvalues.len();
    let m0 = if p.m0.is_empty() { vec![1.0; d] } else { p.m0.clone() };
    let spec = PosteriorSpec::isotropic(d, p.sigma2, p.n_samples)?;
    let tr = run_quadratic_trajectory(&problem, p.optimizer, &spec, &m0, p.rho, p.steps, &stream.child(1))?;
    let last = tr.steps.len().saturating_sub(1);
    let mut text = String::new();
    for (i, s) in tr.steps.iter().enumerate() {
        if s.step % p.log_every != 0 && i != last {
            continue;
        }
        let mut flags = Vec::new();
        if s.modes.modes.iter().any(|m| m.clamped) {
            flags.push("z_clamped".to_string());
        }
        if tr.truncated && i == last {
            flags.push("divergent".to_string());
        }
        let row = QuadRow {
            step: s.step,
            loss: s.loss,
            iterate_norm: s.iterate_norm,
            eigenvalues: s.modes.modes.iter().map(|m| m.lambda).collect(),
            z: s.modes.modes.iter().map(|m| m.z.is_finite().then_some(m.z)).collect(),
            thresholds: s.modes.thresholds(),
            margins: s.modes.modes.iter().map(|m| m.margin).collect(),
            flags,
        };
        text.push_str(&serde_json::to_string(&row)?);
        text.push('\n');
    }
    out.write_bytes("trajectory.jsonl", text.as_bytes())?;
    #[derive(Serialize)]
    struct Summary {
        optimizer: QuadOptimizer,
        class: Option<crate::stability::StabilityClass>,
        truncated: bool,
        steps_recorded: usize,
        final_loss: Option<f64>,
    }
    out.write_json(
        "summary.json",
        &Summary {
            optimizer: p.optimizer,
            class: tr.class,
            truncated: tr.truncated,
            steps_recorded: tr.steps.len(),
            final_loss: tr.steps.last().map(|s| s.loss),
        },
    )?;
    let mut notes = RunNotes::default();
    if tr.truncated {
        notes.flags.push("divergent".into());
    }
    Ok(notes)
}

fn smoothing(p: &SmoothingParams, stream: &RandomStream, out: &mut OutputDir) -> Result<RunNotes> {
    let pts = curvature_concentration(p.theta, p.sigma2, &p.n_samples, p.realizations, stream)?;
    let expected = 12.0 * p.theta * p.theta - 4.0 + 12.0 * p.sigma2;
    let rows = pts.iter().map(|c| {
        vec![
            c.n_samples.to_string(),
            format_float(c.mean),
            format_float(c.variance),
            format_float(c.stderr),
            format_float(expected),
        ]
    });
    out.write_csv(
        "concentration.csv",
        &["n_samples", "mean", "variance", "stderr", "expected_mean"],
        rows,
    )?;
    let rows = p.sigma2_grid.iter().map(|&s2| {
        let m = smoothed_minimizer(s2);
        vec![
            format_float(s2),
            opt_float(m),
            opt_float(m.map(|m| smoothed_quartic(m, s2).1)),
        ]
    });
    out.write_csv("smoothed.csv", &["sigma2", "minimizer", "curvature_at_minimizer"], rows)?;
    #[derive(Serialize)]
    struct Summary {
        loglog_variance_slope: Option<f64>,
    }
    out.write_json(
        "summary.json",
        &Summary {
            loglog_variance_slope: loglog_slope(&pts),
        },
    )?;
    Ok(RunNotes::default())
}

fn escape(p: &EscapeParams, stream: &RandomStream, out: &mut OutputDir) -> Result<RunNotes> {
    let mut rows = Vec::with_capacity(p.sigma2.len());
    let mut notes = RunNotes::default();
    for (i, &s2) in p.sigma2.iter().enumerate() {
        let s = escape_frequency(p.rho, s2, p.n_samples, p.steps, p.m0, p.runs, &stream.child(i as u64))?;
        if s.divergent > 0 && !notes.flags.iter().any(|f| f == "divergent") {
            notes.flags.push("divergent".into());
        }
        rows.push(vec![
            format_float(s2),
            s.runs.to_string(),
            s.sharp.to_string(),
            s.flat.to_string(),
            s.divergent.to_string(),
            format_float(s.escape_frequency()),
        ]);
    }
    out.write_csv(
        "escape.csv",
        &["sigma2", "runs", "sharp", "flat", "divergent", "escape_frequency"],
        rows,
    )?;
    Ok(notes)
}

fn run_to_file(config: &TrainConfig, seed: u64, out: &OutputDir, name: &str) -> Result<TrainOutcome> {
    let mut tr = Trajectory::create(&out.path(name))?;
    let outcome = train(config, seed, &mut tr)?;
    drop(tr);
    Ok(outcome)
}

#[derive(Serialize)]
struct TrainSummary {
    steps: u64,
    diverged: bool,
    final_loss: Option<f64>,
    final_sharpness: Option<f64>,
    /// Mean sharpness over the last 10% of steps.
    tail_sharpness: Option<f64>,
    /// Mean `|normalized_sharpness - vf|` over the second half.
    tracking_gap: Option<f64>,
    /// Median preconditioned sharpness over the second half.
    median_preconditioned_sharpness: Option<f64>,
    final_elbo: Option<f64>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn summarize(config: &TrainConfig, o: &TrainOutcome) -> TrainSummary {
    let half = config.steps / 2;
    TrainSummary {
        steps: o.steps,
        diverged: o.diverged,
        final_loss: o.rows.iter().rev().find_map(|r| r.loss),
        final_sharpness: o.final_sharpness(),
        tail_sharpness: o.tail_mean(config.steps - config.steps / 10, |r| r.sharpness),
        tracking_gap: o.tracking_gap(half),
        median_preconditioned_sharpness: median(
            o.rows
                .iter()
                .filter(|r| r.step >= half)
                .filter_map(|r| r.preconditioned_sharpness)
                .collect(),
        ),
        final_elbo: o.rows.iter().rev().find_map(|r| r.elbo),
    }
}

fn train_notes(outcomes: &[&TrainOutcome]) -> RunNotes {
    let mut notes = RunNotes::default();
    for o in outcomes {
        notes.warnings.extend(o.warnings.iter().cloned());
        if o.diverged && !notes.flags.iter().any(|f| f == "divergent") {
            notes.flags.push("divergent".into());
        }
    }
    notes
}

fn train_run(p: &TrainConfig, seed: u64, out: &mut OutputDir) -> Result<RunNotes> {
    let o = run_to_file(p, seed, out, "trajectory.jsonl")?;
    out.register("trajectory.jsonl")?;
    let mut csv = Vec::new();
    write_trajectory_csv(&o.rows, &mut csv)?;
    out.write_bytes("trajectory.csv", &csv)?;
    out.write_json("summary.json", &summarize(p, &o))?;
    Ok(train_notes(&[&o]))
}

fn spectrum(p: &TrainConfig, seed: u64, out: &mut OutputDir) -> Result<RunNotes> {
    let o = run_to_file(p, seed, out, "trajectory.jsonl")?;
    out.register("trajectory.jsonl")?;
    let rows = o.rows.iter().flat_map(|r: &TrajectoryRow| {
        r.top_eigenvalues.iter().enumerate().map(move |(i, l)| {
            vec![
                r.step.to_string(),
                (i + 1).to_string(),
                opt_float(*l),
                opt_float(r.thresholds.get(i).copied().flatten()),
            ]
        })
    });
    out.write_csv("spectrum.csv", &["step", "mode", "eigenvalue", "threshold"], rows)?;
    out.write_json("summary.json", &summarize(p, &o))?;
    Ok(train_notes(&[&o]))
}

fn von_compare(p: &VonCompareParams, seed: u64, out: &mut OutputDir) -> Result<RunNotes> {
    let (adam, ivon) = {
        let o: &OutputDir = out;
        rayon::join(
            || run_to_file(&p.adam, seed, o, "adam.jsonl"),
            || run_to_file(&p.ivon, seed, o, "ivon.jsonl"),
        )
    };
    let (adam, ivon) = (adam?, ivon?);
    out.register("adam.jsonl")?;
    out.register("ivon.jsonl")?;
    #[derive(Serialize)]
    struct Summary {
        adam: TrainSummary,
        adam_threshold: f64,
        ivon: TrainSummary,
        ivon_threshold: f64,
    }
    out.write_json(
        "summary.json",
        &Summary {
            adam: summarize(&p.adam, &adam),
            adam_threshold: 2.0 / p.adam.rho,
            ivon: summarize(&p.ivon, &ivon),
            ivon_threshold: 2.0 / p.ivon.rho,
        },
    )?;
    Ok(train_notes(&[&adam, &ivon]))
}

fn elbo_sweep(p: &ElboSweepParams, seed: u64, out: &mut OutputDir) -> Result<RunNotes> {
    use rayon::prelude::*;
    let configs = p.configs();
    let outcomes = {
        let o: &OutputDir = out;
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| run_to_file(c, seed, o, &format!("elbo_{i}.jsonl")))
            .collect::<Result<Vec<_>>>()?
    };
    for i in 0..configs.len() {
        out.register(&format!("elbo_{i}.jsonl"))?;
    }
    let rows = configs.iter().zip(&outcomes).enumerate().map(|(i, (c, o))| {
        let s = summarize(c, o);
        vec![
            i.to_string(),
            format_float(c.sigma2),
            opt_float(s.final_loss),
            opt_float(s.final_elbo),
            opt_float(s.final_sharpness),
            s.diverged.to_string(),
        ]
    });
    out.write_csv(
        "summary.csv",
        &["run", "sigma2", "final_loss", "final_elbo", "final_sharpness", "diverged"],
        rows,
    )?;
    Ok(train_notes(&outcomes.iter().collect::<Vec<_>>()))
}
