//! Trajectory rows and their JSONL/CSV encodings.
//!
//! JSONL rows always carry the same keys in this order:
//!
//! | key | type |
//! |-----|------|
//! | `step` | integer, strictly increasing |
//! | `loss` | number or null |
//! | `train_accuracy` | number or null |
//! | `test_accuracy` | number or null |
//! | `grad_norm` | number or null |
//! | `sharpness` | number or null |
//! | `top_eigenvalues` | array of number or null |
//! | `thresholds` | array of number or null, `(2/rho) VF(z_i)` per mode |
//! | `normalized_sharpness` | number or null |
//! | `vf` | number or null |
//! | `preconditioned_sharpness` | number or null |
//! | `elbo` | number or null |
//! | `flags` | array of string |
//!
//! `null` means "not measured at this step" unless `flags` contains
//! `non_finite:<key>`, in which case the measurement was NaN or infinite.
//! Other flags: `eigen_unconverged`, `z_clamped`, `precision_all_clamped`,
//! `divergent`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRow {
    pub step: u64,
    pub loss: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub grad_norm: Option<f64>,
    pub sharpness: Option<f64>,
    pub top_eigenvalues: Vec<Option<f64>>,
    pub thresholds: Vec<Option<f64>>,
    pub normalized_sharpness: Option<f64>,
    pub vf: Option<f64>,
    pub preconditioned_sharpness: Option<f64>,
    pub elbo: Option<f64>,
    pub flags: Vec<String>,
}

impl TrajectoryRow {
    pub fn new(step: u64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        let flag = flag.into();
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// Replaces NaN and infinities by `None` and records which keys were hit.
    fn sanitize(&mut self) {
        let mut hits = Vec::new();
        let mut scalar = |name: &'static str, v: &mut Option<f64>| {
            if matches!(v, Some(x) if !x.is_finite()) {
                *v = None;
                hits.push(name);
            }
        };
        scalar("loss", &mut self.loss);
        scalar("train_accuracy", &mut self.train_accuracy);
        scalar("test_accuracy", &mut self.test_accuracy);
        scalar("grad_norm", &mut self.grad_norm);
        scalar("sharpness", &mut self.sharpness);
        scalar("normalized_sharpness", &mut self.normalized_sharpness);
        scalar("vf", &mut self.vf);
        scalar("preconditioned_sharpness", &mut self.preconditioned_sharpness);
        scalar("elbo", &mut self.elbo);
        for (name, list) in [("top_eigenvalues", &mut self.top_eigenvalues), ("thresholds", &mut self.thresholds)] {
            let mut hit = false;
            for v in list.iter_mut() {
                if matches!(v, Some(x) if !x.is_finite()) {
                    *v = None;
                    hit = true;
                }
            }
            if hit {
                hits.push(name);
            }
        }
        for name in hits {
            self.flag(format!("non_finite:{name}"));
        }
    }
}

/// An append-only sequence of rows, optionally mirrored to a JSONL sink that
/// is flushed after every row.
pub struct Trajectory {
    rows: Vec<TrajectoryRow>,
    sink: Option<Box<dyn Write + Send>>,
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory")
            .field("rows", &self.rows.len())
            .field("sink", &self.sink.is_some())
            .finish()
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Trajectory {
    pub fn in_memory() -> Self {
        Self {
            rows: Vec::new(),
            sink: None,
        }
    }

    pub fn with_sink(sink: impl Write + Send + 'static) -> Self {
        Self {
            rows: Vec::new(),
            sink: Some(Box::new(sink)),
        }
    }

    /// Truncates `path` and streams rows to it.
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self::with_sink(std::io::BufWriter::new(File::create(path)?)))
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last_step(&self) -> Option<u64> {
        self.rows.last().map(|r| r.step)
    }

    pub fn into_rows(self) -> Vec<TrajectoryRow> {
        self.rows
    }

    /// Appends `row` after replacing non-finite values by flagged nulls.
    /// The row is written and flushed before this returns.
    pub fn record_step(&mut self, mut row: TrajectoryRow) -> Result<()> {
        if let Some(last) = self.last_step() {
            if row.step <= last {
                return Err(Error::contract(format!("step {} recorded after step {last}", row.step)));
            }
        }
        row.sanitize();
        if let Some(sink) = self.sink.as_mut() {
            let mut line = serde_json::to_vec(&row)?;
            line.push(b'\n');
            sink.write_all(&line)?;
            sink.flush()?;
        }
        self.rows.push(row);
        Ok(())
    }
}

/// Reads a JSONL trajectory. A trailing partial line (an interrupted write)
/// is reported as a parse error with its line number.
pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// 17 significant digits in scientific notation; parses back to the same
/// `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub const TRAJECTORY_CSV_HEADER: [&str; 11] = [
    "step",
    "loss",
    "train_accuracy",
    "test_accuracy",
    "grad_norm",
    "sharpness",
    "normalized_sharpness",
    "vf",
    "preconditioned_sharpness",
    "elbo",
    "flags",
];

/// Scalar columns of the trajectory as CSV; empty cells for nulls and
/// `;`-joined flags.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAJECTORY_CSV_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            cell(r.loss),
            cell(r.train_accuracy),
            cell(r.test_accuracy),
            cell(r.grad_norm),
            cell(r.sharpness),
            cell(r.normalized_sharpness),
            cell(r.vf),
            cell(r.preconditioned_sharpness),
            cell(r.elbo),
            r.flags.join(";"),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}
