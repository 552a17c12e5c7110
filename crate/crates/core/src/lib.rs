//! Bayesian optimization for maximal reliability.
//!
//! Given an expensive black-box `f`, a threshold `c`, a feasible box and a
//! Gaussian perturbation model, the goal is the nominal design `x` that
//! minimizes the probability that `f(x + u) >= c` or that `x + u` leaves the
//! box. This crate holds the algorithmic core:
//!
//! * [`numerics`]: scrambled Sobol' streams, Box-Muller qMC, special functions.
//! * [`surrogate`]: Matérn-5/2 GP with MAP hyperparameters, fantasies and
//!   random-Fourier-feature sample paths.
//! * [`reliability`]: smoothed, importance-weighted failure probability
//!   estimators and the ground-truth scorer.
//! * [`optimizers`]: bounded quasi-Newton multistart, Boltzmann restarts, DIRECT.
//! * [`acquisition`]: TS-MR, discrete and one-shot KG-MR, HC, EGRA, EI, Sobol'.
//! * [`problems`]: the benchmark suite.
//! * [`harness`]: the outer BO loop, recommendations and trace records.
//! * [`report`]: order-statistic aggregation of traces.
//!
//! The crate is `no_std` (with `alloc`); all transcendental functions go
//! through `libm` so results are bit-identical across platforms. File formats,
//! the CLI and parallel execution live in the companion `relbo` crate.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod domain;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod numerics;
pub mod optimizers;
pub mod problems;
pub mod reliability;
pub mod report;
pub mod surrogate;

pub use domain::Bounds;
pub use error::{Error, Result};
