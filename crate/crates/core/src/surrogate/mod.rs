//! Gaussian-process surrogate of the black-box objective.

pub mod fit;
pub mod gp;
pub mod kernel;
pub mod rff;

pub use fit::{fit_map, FitOptions};
pub use gp::{OutputTransform, Prediction, Surrogate, Workspace, VARIANCE_FLOOR};
pub use kernel::{kernel_matern52, GpHyperparams, Matern52, NOISE_VARIANCE};
pub use rff::{draw_rff_path, prior_path, RffPath, DEFAULT_FEATURES};
