//! Inner-loop optimizers shared by all acquisition strategies.

pub mod boltzmann;
pub mod direct;
pub mod qn;

pub use boltzmann::{argmax, boltzmann_restarts, RestartPlan};
pub use direct::{direct_maximize, DirectResult};
pub use qn::{minimize, multistart_maximize, multistart_minimize, MultistartResult, QnOptions, QnResult, QnStatus};
