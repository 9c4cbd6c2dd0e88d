//! Small smooth models with exact derivative oracles, and their data.

mod data;
mod mlp;

pub use data::{load_csv_dataset, synth_dataset, Batch, BatchSchedule, CsvDataset, Dataset};
pub use mlp::{Activation, MlpModel, MlpObjective};
