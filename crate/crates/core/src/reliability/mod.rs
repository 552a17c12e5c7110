//! Failure-probability estimators.

mod estimator;
mod perturbation;
mod smoothing;
mod truth;

pub use estimator::{estimate_pn, estimate_ptilde, phi_n, Estimate, PhiN, ValueScale};
pub(crate) use estimator::{finish_estimate, log_j, posterior_t, LogSumExp};
pub use perturbation::{draw_is_sample, draw_is_sample_from, IsSample, PerturbationModel};
pub use smoothing::{log_smooth_feasibility, ramp, smooth_feasibility, SmoothingConfig};
pub use truth::{evaluate_true_failure, evaluate_true_failure_streamed, evaluate_true_failure_with, TrueFailure};
