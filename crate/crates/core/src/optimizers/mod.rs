//! Update rules: GD, variational GD, Adam (no momentum), VON with exact
//! quadratic expectations, IVON-style Stein updates, and the variational
//! objective.

mod checkpoint;
mod elbo;
mod first_order;
mod von;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, OptimizerState, CHECKPOINT_VERSION,
};
pub use elbo::{elbo_estimate, gaussian_entropy, ElboEstimate};
pub use first_order::{adam_step, gd_step, vgd_step, AdamState, GdState, VgdState, DEFAULT_EPS};
pub use von::{
    ivon_step, stein_hessian_estimate, von_step_exact_quadratic, IvonStepInfo, VonState, PRECISION_FLOOR,
};
