//! Point-selection strategies.
//!
//! Every strategy maps the fitted surrogate plus the problem context to the
//! next query point `y_{n+1}` inside the feasible box. Randomness comes only
//! from seeds derived from the run seed and the iteration index, so repeated
//! calls on identical inputs return bit-identical points.

mod baseline;
mod common;
mod egra;
mod hc;
pub mod kg;
mod thompson;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optimizers::QnOptions;
use crate::problems::{Mode, Problem};
use crate::reliability::ValueScale;
use crate::surrogate::{Surrogate, DEFAULT_FEATURES};

pub use baseline::{design_point, design_seed, expected_improvement, sobol_next};
pub use egra::{expected_feasibility, expected_feasibility_grad};
pub use hc::{hc_next, HcRule};
pub use kg::{kg_discrete_next, kg_oneshot_next};
pub use thompson::{log_alpha_mv, ts_mr_next};

/// Strategy identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcquisitionKind {
    TsMr,
    KgDiscrete,
    KgOneShot,
    Hc,
    Egra,
    Ei,
    Sobol,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 7] = [
        AcquisitionKind::KgOneShot,
        AcquisitionKind::KgDiscrete,
        AcquisitionKind::TsMr,
        AcquisitionKind::Hc,
        AcquisitionKind::Egra,
        AcquisitionKind::Ei,
        AcquisitionKind::Sobol,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AcquisitionKind::TsMr => "ts_mr",
            AcquisitionKind::KgDiscrete => "kg_mr_discrete",
            AcquisitionKind::KgOneShot => "kg_mr_oneshot",
            AcquisitionKind::Hc => "hc",
            AcquisitionKind::Egra => "egra",
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::Sobol => "sobol",
        }
    }

    /// Whether the strategy consults the surrogate at all.
    pub fn uses_model(self) -> bool {
        self != AcquisitionKind::Sobol
    }
}

impl core::fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for AcquisitionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AcquisitionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown acquisition `{s}`")))
    }
}

/// One column of the benchmark: a strategy plus all of its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    /// IS/qMC sample size for the failure-probability estimates.
    pub n_u: usize,
    /// Fantasy count for the KG variants.
    pub n_v: usize,
    /// Discretization size for discrete KG (and one-shot initialization).
    pub n_x: usize,
    pub tau: f64,
    /// Bounds smoothing width in design units.
    pub delta: f64,
    /// Threshold smoothing for Thompson paths, in objective units.
    pub rho: f64,
    pub kappa: f64,
    pub eps_s: f64,
    pub band: f64,
    /// `Log`: `R = −log P̂`; `Linear`: `R = −P̂`.
    pub value_scale: ValueScale,
    /// Random Fourier features for Thompson paths.
    pub n_rff: usize,
    /// Raw candidates scanned before choosing restarts.
    pub n_raw: usize,
    /// Raw candidates for the one-shot KG initialization (discrete KG
    /// evaluations, the expensive part).
    pub n_raw_oneshot: usize,
    pub n_restarts: usize,
    pub qn: QnOptions,
    /// Evaluation budget for DIRECT in HC's limit-state rule.
    pub direct_budget: usize,
    /// Boltzmann temperature; `None` is adaptive.
    pub temperature: Option<f64>,
}

impl AcquisitionSpec {
    /// Defaults for `kind` on `problem`.
    pub fn defaults(kind: AcquisitionKind, problem: &Problem) -> Self {
        let d = problem.dim();
        Self {
            kind,
            n_u: 64,
            n_v: 64,
            n_x: 512,
            tau: problem.mode.default_tau(),
            delta: problem.default_delta(),
            rho: 0.01,
            kappa: 2.0,
            eps_s: problem.hc.eps_s,
            band: problem.hc.delta,
            value_scale: match problem.mode {
                Mode::Extreme => ValueScale::Log,
                Mode::NonExtreme => ValueScale::Linear,
            },
            n_rff: DEFAULT_FEATURES,
            n_raw: 1024,
            n_raw_oneshot: if d <= 2 { 512 } else { 1024 },
            n_restarts: 10,
            qn: QnOptions::default(),
            direct_budget: 200 * d,
            temperature: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{}: {what}", self.kind)));
        if self.n_u == 0 || self.n_v == 0 || self.n_x == 0 || self.n_raw == 0 || self.n_raw_oneshot == 0 {
            return bad("sample sizes must be positive");
        }
        if self.n_restarts == 0 {
            return bad("n_restarts must be positive");
        }
        if !(self.tau >= 1.0) {
            return bad("tau must be >= 1");
        }
        if !(self.delta >= 0.0) || !(self.rho > 0.0) || !(self.kappa >= 0.0) {
            return bad("smoothing widths must be non-negative (rho positive)");
        }
        if !(self.eps_s >= 0.0) || !(self.band >= 0.0) {
            return bad("HC parameters must be non-negative");
        }
        if self.n_rff == 0 || self.qn.max_iters == 0 {
            return bad("n_rff and max_iters must be positive");
        }
        Ok(())
    }
}

/// Everything a strategy may look at.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub problem: &'a Problem,
    /// Fitted surrogate; `None` only for the Sobol' baseline.
    pub gp: Option<&'a Surrogate>,
    /// Observed inputs (original units) and values.
    pub inputs: &'a Matrix,
    pub values: &'a [f64],
    /// Repeat seed.
    pub seed: u64,
    /// Number of observations so far (the iteration index).
    pub n: usize,
}

impl<'a> Context<'a> {
    pub(crate) fn surrogate(&self) -> Result<&'a Surrogate> {
        self.gp.ok_or_else(|| Error::Config("strategy needs a fitted surrogate".into()))
    }
}

/// Which rule or stage produced a query point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Thompson,
    KgDiscrete,
    KgOneShot,
    Hc(HcRule),
    Egra,
    Ei,
    Sobol,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Thompson => "ts",
            Rule::KgDiscrete => "dkg",
            Rule::KgOneShot => "oskg",
            Rule::Hc(r) => r.as_str(),
            Rule::Egra => "egra",
            Rule::Ei => "ei",
            Rule::Sobol => "sobol",
        }
    }
}

/// A selected query point with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub y: Vec<f64>,
    /// Acquisition value at `y` (strategy-specific units).
    pub value: f64,
    pub rule: Rule,
    /// TS-MR nominal design and perturbation.
    pub nominal: Option<Vec<f64>>,
    pub perturbation: Option<Vec<f64>>,
    /// A problem the strategy ran into but worked around.
    pub warning: Option<String>,
}

impl Proposal {
    pub(crate) fn new(y: Vec<f64>, value: f64, rule: Rule) -> Self {
        Self { y, value, rule, nominal: None, perturbation: None, warning: None }
    }
}

/// Selects the next query point with the configured strategy.
pub fn propose(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Proposal> {
    let mut p = match spec.kind {
        AcquisitionKind::TsMr => ts_mr_next(ctx, spec)?,
        AcquisitionKind::KgDiscrete => kg_discrete_next(ctx, spec)?,
        AcquisitionKind::KgOneShot => kg_oneshot_next(ctx, spec)?,
        AcquisitionKind::Hc => hc_next(ctx, spec)?,
        AcquisitionKind::Egra => egra::egra_next(ctx, spec)?,
        AcquisitionKind::Ei => baseline::ei_next(ctx, spec)?,
        AcquisitionKind::Sobol => sobol_next(ctx)?,
    };
    // Optimizers work on the closed box; clip the last ulp of drift.
    ctx.problem.bounds.project(&mut p.y);
    Ok(p)
}
