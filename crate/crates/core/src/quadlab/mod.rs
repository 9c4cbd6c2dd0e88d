//! Dynamics experiments on quadratic and quartic toy losses.
//!
//! Every experiment takes a [`RandomStream`](crate::numerics::RandomStream)
//! and derives one child stream per grid cell, trial and step, so results do
//! not depend on how rayon schedules the work.

mod boundary;
mod escape;
mod grid;
mod heatmap;
mod histogram;
mod smoothing;
mod trajectory;

pub use boundary::{boundary_criteria, stability_boundary, BoundaryFit, StabilityBoundary};
pub use escape::{double_well_escape, escape_frequency, Basin, DoubleWell, EscapeRun, EscapeSummary};
pub use grid::{AxisScale, AxisSpec, GridExperimentConfig};
pub use heatmap::{descent_heatmap, theory_threshold, DescentHeatmap};
pub use histogram::{iterate_histogram, Histogram, IterateHistogram};
pub use smoothing::{
    averaged_curvature_mc, curvature_concentration, loglog_slope, quartic_loss, smoothed_minimizer,
    smoothed_quartic, CurvaturePoint,
};
pub use trajectory::{run_quadratic_trajectory, QuadOptimizer, QuadStep, QuadTrajectory};
