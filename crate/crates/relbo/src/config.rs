//! Experiment configuration files.
//!
//! ```toml
//! [problem]
//! name = "branin-2d"
//! mode = "extreme"
//!
//! [acquisition]
//! kind = "kg_mr_oneshot"
//! n_v = 64
//!
//! [budget]
//! n_tot = 50
//! repeats = 5
//! base_seed = 0
//!
//! [recommendation]
//! n_candidates = 1024
//! ```
//!
//! Every key except `problem.name`, `acquisition.kind` and `budget.n_tot` is
//! optional; unknown keys are rejected. [`ExperimentConfig::resolved`] fills
//! in every default so that the echoed configuration (and its hash) pins the
//! full parameter set.

use std::path::Path;

use anyhow::{bail, Context, Result};
use relbo_core::acquisition::{AcquisitionKind, AcquisitionSpec};
use relbo_core::harness::{RecommendSpec, RunConfig};
use relbo_core::problems::{problem, Mode};
use relbo_core::reliability::ValueScale;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub acquisition: AcquisitionSection,
    pub budget: BudgetSection,
    #[serde(default)]
    pub recommendation: RecommendationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    /// `extreme` (default) or `non-extreme`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    pub kind: String,
    /// Name used to group runs in reports; defaults to `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_u: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_v: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    /// `log` or `linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_scale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_raw: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_raw_oneshot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_budget: Option<usize>,
    /// Boltzmann temperature for restart selection; adaptive when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub n_tot: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_u: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_u_fine: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
}

/// Everything needed to execute the repeats of one configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub run: RunConfig,
    pub label: String,
    pub repeats: usize,
    pub base_seed: u64,
}

impl Experiment {
    /// Seed of repeat `r`.
    pub fn seed(&self, r: usize) -> u64 {
        self.base_seed.wrapping_add(r as u64)
    }
}

fn parse_scale(s: &str) -> Result<ValueScale> {
    match s {
        "log" => Ok(ValueScale::Log),
        "linear" => Ok(ValueScale::Linear),
        _ => bail!("unknown value scale `{s}` (expected `log` or `linear`)"),
    }
}

fn scale_name(s: ValueScale) -> &'static str {
    match s {
        ValueScale::Log => "log",
        ValueScale::Linear => "linear",
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn mode(&self) -> Result<Mode> {
        Ok(self.problem.mode.as_deref().unwrap_or("extreme").parse::<Mode>()?)
    }

    /// Builds the run description, applying defaults for missing keys.
    pub fn build(&self) -> Result<Experiment> {
        let mode = self.mode()?;
        let p = problem(&self.problem.name, mode)?;
        let kind: AcquisitionKind = self.acquisition.kind.parse()?;
        let a = &self.acquisition;
        let mut acq = AcquisitionSpec::defaults(kind, &p);
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(acq.n_u, a.n_u);
        set!(acq.n_v, a.n_v);
        set!(acq.n_x, a.n_x);
        set!(acq.tau, a.tau);
        set!(acq.delta, a.delta);
        set!(acq.rho, a.rho);
        set!(acq.kappa, a.kappa);
        set!(acq.eps_s, a.eps_s);
        set!(acq.band, a.band);
        set!(acq.n_rff, a.n_rff);
        set!(acq.n_raw, a.n_raw);
        set!(acq.n_raw_oneshot, a.n_raw_oneshot);
        set!(acq.n_restarts, a.n_restarts);
        set!(acq.qn.max_iters, a.max_iters);
        set!(acq.direct_budget, a.direct_budget);
        if let Some(s) = &a.value_scale {
            acq.value_scale = parse_scale(s)?;
        }
        if a.temperature.is_some() {
            acq.temperature = a.temperature;
        }

        let mut run = RunConfig::new(p, acq, self.budget.n_tot);
        set!(run.checkpoint_stride, self.budget.checkpoint_stride);
        set!(run.score_samples, self.budget.score_samples);
        let r = &self.recommendation;
        set!(run.recommend.n_candidates, r.n_candidates);
        set!(run.recommend.n_restarts, r.n_restarts);
        set!(run.recommend.n_u, r.n_u);
        set!(run.recommend.n_u_fine, r.n_u_fine);
        set!(run.recommend.qn.max_iters, r.max_iters);
        run.validate()?;

        let repeats = self.budget.repeats.unwrap_or(1);
        if repeats == 0 {
            bail!("budget.repeats must be positive");
        }
        Ok(Experiment {
            run,
            label: a.label.clone().unwrap_or_else(|| kind.as_str().to_string()),
            repeats,
            base_seed: self.budget.base_seed.unwrap_or(0),
        })
    }

    /// The same configuration with every default written out.
    pub fn resolved(&self) -> Result<Self> {
        let e = self.build()?;
        let acq = &e.run.acquisition;
        let rec: &RecommendSpec = &e.run.recommend;
        Ok(Self {
            problem: ProblemSection { name: self.problem.name.clone(), mode: Some(self.mode()?.as_str().to_string()) },
            acquisition: AcquisitionSection {
                kind: acq.kind.as_str().to_string(),
                label: Some(e.label.clone()),
                n_u: Some(acq.n_u),
                n_v: Some(acq.n_v),
                n_x: Some(acq.n_x),
                tau: Some(acq.tau),
                delta: Some(acq.delta),
                rho: Some(acq.rho),
                kappa: Some(acq.kappa),
                eps_s: Some(acq.eps_s),
                band: Some(acq.band),
                value_scale: Some(scale_name(acq.value_scale).to_string()),
                n_rff: Some(acq.n_rff),
                n_raw: Some(acq.n_raw),
                n_raw_oneshot: Some(acq.n_raw_oneshot),
                n_restarts: Some(acq.n_restarts),
                max_iters: Some(acq.qn.max_iters),
                direct_budget: Some(acq.direct_budget),
                temperature: acq.temperature,
            },
            budget: BudgetSection {
                n_tot: e.run.n_tot,
                repeats: Some(e.repeats),
                base_seed: Some(e.base_seed),
                checkpoint_stride: Some(e.run.checkpoint_stride),
                score_samples: Some(e.run.score_samples),
            },
            recommendation: RecommendationSection {
                n_candidates: Some(rec.n_candidates),
                n_restarts: Some(rec.n_restarts),
                n_u: Some(rec.n_u),
                n_u_fine: Some(rec.n_u_fine),
                max_iters: Some(rec.qn.max_iters),
            },
        })
    }

    /// SHA-256 of the resolved configuration in canonical JSON.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_string(&self.resolved()?)?;
        Ok(sha256_hex(json.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
