//! Deterministic low-level numerics.

mod direction_numbers;
pub mod gaussian;
pub mod seed;
pub mod sobol;
pub mod special;

pub use gaussian::{box_muller, gaussian_qmc};
pub use sobol::SobolStream;
pub use special::{normal, regularized_lower_gamma, std_normal_cdf, std_normal_log_cdf, std_normal_pdf};
