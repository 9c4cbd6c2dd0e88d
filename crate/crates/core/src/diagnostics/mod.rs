//! Hessian spectra at the mean iterate, threshold tracking and trajectory
//! recording.

mod record;
mod spectral;
mod tracker;

pub use record::{
    format_float, read_trajectory, write_trajectory_csv, Trajectory, TrajectoryRow, TRAJECTORY_CSV_HEADER,
};
pub use spectral::{
    hessian_top_eigen, preconditioned_sharpness, preconditioned_top_eigen, top_eigen, SpectralResult, DEFAULT_TOL,
    MAX_K,
};
pub use tracker::{hypothesis_tracker, spectrum_vs_thresholds, HypothesisPoint};
pub(crate) use record::csv_error;
