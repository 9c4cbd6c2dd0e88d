//! Closed-form stability mathematics for variational gradient descent on
//! quadratics, plus the Monte-Carlo estimators used to check it.

mod classify;
mod descent;
mod factor;
mod montecarlo;
mod posterior;
mod problem;

pub use classify::{classify_stability, StabilityClass, StabilityCriteria};
pub use descent::{
    expected_loss_change, mode_diagnostics, mode_z, necessary_sufficient_check, per_mode_bound_terms,
    sufficient_descent_check, DescentCheck, ModeDiagnostic, ModeDiagnostics,
};
pub use factor::{
    cubic_residual, stability_threshold, variational_factor, variational_factor_clamped, Z_FLOOR,
};
pub use montecarlo::{
    descent_margin_trend, descent_probability_mc, perturbed_gradient, vgd_one_step_change, MarginTrendPoint,
    ProbabilityEstimate,
};
pub use posterior::{Perturbation, PerturbationFamily, PosteriorSpec};
pub use problem::QuadraticProblem;
pub(crate) use montecarlo::scalar_vgd_step;
