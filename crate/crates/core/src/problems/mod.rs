//! Benchmark problems: objective, feasible box, threshold and perturbations.

pub mod functions;
mod registry;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::reliability::PerturbationModel;
use crate::surrogate::RffPath;

pub use registry::{
    calibrate_threshold, gp_sample_path, make_gp_problem, problem, problem_names, GP_PROBLEM_SEEDS, SUITE_LAYOUT,
};

/// Whether the optimal failure probability is extremely small (importance
/// sampling, log value function) or moderate (plain MC, linear value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Extreme,
    NonExtreme,
}

impl Mode {
    /// Default importance-sampling scale for this regime.
    pub fn default_tau(self) -> f64 {
        match self {
            Mode::Extreme => 3.0,
            Mode::NonExtreme => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Extreme => "extreme",
            Mode::NonExtreme => "non-extreme",
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extreme" => Ok(Mode::Extreme),
            "non-extreme" | "nonextreme" => Ok(Mode::NonExtreme),
            _ => Err(Error::Config(alloc::format!("unknown mode `{s}`"))),
        }
    }
}

/// The black-box objective of a problem.
#[derive(Debug, Clone)]
pub enum Objective {
    Branin,
    SixHumpCamel,
    Ackley,
    Quadratic,
    StyblinskiTang,
    Hartmann6,
    /// A fixed sample path of a GP prior.
    GpSample(Box<RffPath>),
}

impl Objective {
    #[inline]
    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Objective::Branin => functions::branin(y),
            Objective::SixHumpCamel => functions::six_hump_camel(y),
            Objective::Ackley => functions::ackley(y),
            Objective::Quadratic => functions::quadratic(y),
            Objective::StyblinskiTang => functions::styblinski_tang(y),
            Objective::Hartmann6 => functions::hartmann6(y),
            Objective::GpSample(p) => p.eval(y),
        }
    }
}

/// HC parameters: minimum sample spacing and limit-state band half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcParams {
    pub eps_s: f64,
    pub delta: f64,
}

/// One benchmark instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub objective: Objective,
    pub bounds: Bounds,
    pub threshold: f64,
    pub perturbation: PerturbationModel,
    pub n0: usize,
    pub hc: HcParams,
    pub mode: Mode,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// Evaluates the objective; points outside the feasible box are a
    /// contract violation.
    pub fn evaluate(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::Config(alloc::format!("point has {} coordinates, expected {}", y.len(), self.dim())));
        }
        self.bounds.check(y)?;
        Ok(self.objective.value(y))
    }

    /// Evaluates without the containment check (used by the scorer, which
    /// only evaluates perturbed points that lie inside the box).
    #[inline]
    pub fn value_unchecked(&self, y: &[f64]) -> f64 {
        self.objective.value(y)
    }

    /// Default bounds-smoothing width `min(0.05·ℓ_min, 0.1)`.
    pub fn default_delta(&self) -> f64 {
        (0.05 * self.bounds.min_side()).min(0.1)
    }

    /// Whether `ε_s` matches one hundredth of the box diagonal (to the two
    /// significant digits the published parameters carry).
    pub fn eps_s_consistent(&self) -> bool {
        let want = 0.01 * self.bounds.diagonal();
        (self.hc.eps_s - want).abs() <= 0.03 * want
    }

    pub fn sigma(&self) -> &[f64] {
        self.perturbation.sigma()
    }
}

/// Expands a perturbation spec with a trailing repeat to length `d`.
pub fn expand_sigma(head: &[f64], tail: f64, d: usize) -> Result<Vec<f64>> {
    if head.len() > d {
        return Err(Error::Config(alloc::format!("{} perturbation scales for dimension {d}", head.len())));
    }
    let mut v = head.to_vec();
    v.resize(d, tail);
    Ok(v)
}
