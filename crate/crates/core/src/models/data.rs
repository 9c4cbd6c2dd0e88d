use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::RandomStream;
use crate::{Error, Result};

/// Inputs with one-hot targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.nrows() != labels.len() {
            return Err(Error::spec(format!(
                "dataset needs n >= 1 rows matching {} labels, got {}",
                labels.len(),
                inputs.nrows()
            )));
        }
        if classes < 1 || labels.iter().any(|&l| l >= classes) {
            return Err(Error::spec(format!("labels must lie in 0..{classes}")));
        }
        let mut targets = Array2::zeros((labels.len(), classes));
        for (i, &l) in labels.iter().enumerate() {
            targets[[i, l]] = 1.0;
        }
        Ok(Self {
            inputs,
            targets,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).chain(0..other.len()).collect();
        let (a, b) = idx.split_at(self.len());
        Dataset {
            inputs: ndarray::concatenate![Axis(0), self.inputs.select(Axis(0), a), other.inputs.select(Axis(0), b)],
            targets: ndarray::concatenate![Axis(0), self.targets.select(Axis(0), a), other.targets.select(Axis(0), b)],
            labels: self.labels.iter().chain(&other.labels).copied().collect(),
            classes: self.classes,
        }
    }
}

/// Gaussian blobs with unit within-class variance. Class `c` is centred at
/// `(separation / sqrt 2) e_c`, so every pair of means is `separation` apart.
/// Row `i` belongs to class `i % classes`.
pub fn synth_dataset(
    classes: usize,
    per_class: usize,
    input_dim: usize,
    separation: f64,
    stream: &RandomStream,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::spec("synthetic dataset needs at least two classes"));
    }
    if input_dim < classes {
        return Err(Error::spec(format!(
            "input_dim {input_dim} must be at least the class count {classes}"
        )));
    }
    if per_class == 0 || !separation.is_finite() || separation < 0.0 {
        return Err(Error::spec("per_class >= 1 and finite non-negative separation required"));
    }
    let n = classes * per_class;
    let offset = separation / std::f64::consts::SQRT_2;
    let mut rng = stream.rng();
    let mut inputs = Array2::zeros((n, input_dim));
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    for (i, mut row) in inputs.outer_iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        row[labels[i]] += offset;
    }
    Dataset::new(inputs, labels, classes)
}

/// Result of [`load_csv_dataset`].
#[derive(Clone, Debug)]
pub struct CsvDataset {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    /// Original label strings, indexed by class.
    pub class_labels: Vec<String>,
    pub warnings: Vec<String>,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a numeric CSV with a header row. Features are standardised per
/// column (population standard deviation); labels are mapped to classes in
/// sorted order, numerically when every label parses as a number.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<CsvDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(std::fs::File::open(path)?);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().parse::<f64>().is_ok()) {
        return Err(parse_err(path, 1, "missing header row"));
    }
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| parse_err(path, 1, format!("unknown label column '{label_column}'")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let p = feature_names.len();
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                raw_labels.push(field.trim().to_string());
            } else {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("non-numeric feature '{field}' in column {}", i + 1)))?;
                if !v.is_finite() {
                    return Err(parse_err(path, line, format!("non-finite feature in column {}", i + 1)));
                }
                values.push(v);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    let n = raw_labels.len();
    let mut inputs = Array2::from_shape_vec((n, p), values).map_err(|e| parse_err(path, 1, e.to_string()))?;
    let mut warnings = Vec::new();
    for (j, mut col) in inputs.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var == 0.0 {
            warnings.push(format!("feature '{}' has zero variance; standardised to zeros", feature_names[j]));
            col.fill(0.0);
        } else {
            let sd = var.sqrt();
            col.mapv_inplace(|v| (v - mean) / sd);
        }
    }
    let numeric = raw_labels.iter().all(|l| l.parse::<f64>().is_ok());
    let mut class_labels: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if numeric {
        class_labels.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| class_labels.iter().position(|c| c == l).unwrap())
        .collect();
    let classes = class_labels.len();
    Ok(CsvDataset {
        dataset: Dataset::new(inputs, labels, classes)?,
        feature_names,
        class_labels,
        warnings,
    })
}

/// One mini-batch: row indices plus their position in the schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub epoch: u64,
    pub position: usize,
}

/// Epoch-wise shuffled partitions of `0..n`. Epoch `e` is shuffled with
/// `stream.child(e)`; the last short batch is kept. A batch size of zero or
/// at least `n` means full batch, which is not shuffled.
#[derive(Clone, Debug)]
pub struct BatchSchedule {
    n: usize,
    batch_size: usize,
    stream: RandomStream,
}

impl BatchSchedule {
    pub fn new(n: usize, batch_size: usize, stream: RandomStream) -> Self {
        Self { n, batch_size, stream }
    }

    pub fn is_full_batch(&self) -> bool {
        self.batch_size == 0 || self.batch_size >= self.n
    }

    pub fn batches_per_epoch(&self) -> usize {
        if self.is_full_batch() {
            1
        } else {
            self.n.div_ceil(self.batch_size)
        }
    }

    pub fn epoch(&self, epoch: u64) -> Vec<Batch> {
        let mut order: Vec<usize> = (0..self.n).collect();
        if self.is_full_batch() {
            return vec![Batch {
                indices: order,
                epoch,
                position: 0,
            }];
        }
        order.shuffle(&mut self.stream.child(epoch).rng());
        order
            .chunks(self.batch_size)
            .enumerate()
            .map(|(position, c)| Batch {
                indices: c.to_vec(),
                epoch,
                position,
            })
            .collect()
    }

    /// Batch used at global step `step`.
    pub fn batch_at(&self, step: u64) -> Batch {
        let per = self.batches_per_epoch() as u64;
        let mut batches = self.epoch(step / per);
        batches.swap_remove((step % per) as usize)
    }
}
