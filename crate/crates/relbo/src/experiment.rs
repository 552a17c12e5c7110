//! Running all repeats of a configuration into an output directory.
//!
//! The directory holds `repeat_<r>.csv` per repeat plus `manifest.json`. A
//! rerun into the same directory resumes unfinished repeats and leaves
//! finished ones alone.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use relbo_core::harness::run_bo;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, Experiment, ExperimentConfig};
use crate::trace::TraceWriter;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub problem: String,
    pub mode: String,
    pub algorithm: String,
    pub dim: usize,
    pub n0: usize,
    pub n_tot: usize,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub repeats: Vec<RepeatStatus>,
    /// Indices of repeats that did not complete.
    pub failed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatStatus {
    pub index: usize,
    pub seed: u64,
    pub trace: String,
    /// `complete` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_sha256: Option<String>,
    /// Rows carried over from an interrupted run.
    pub resumed_from: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_p_true: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Rebuilds the run description from the echoed configuration.
    pub fn experiment(&self) -> Result<Experiment> {
        self.config.build()
    }
}

pub fn trace_name(r: usize) -> String {
    format!("repeat_{r:03}.csv")
}

/// Options from the command line that override the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub repeats: Option<usize>,
    pub base_seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut c = cfg.clone();
        if let Some(r) = self.repeats {
            c.budget.repeats = Some(r);
        }
        if let Some(s) = self.base_seed {
            c.budget.base_seed = Some(s);
        }
        c
    }
}

fn run_repeat(exp: &Experiment, r: usize, dir: &Path) -> RepeatStatus {
    let seed = exp.seed(r);
    let name = trace_name(r);
    let path = dir.join(&name);
    let mut status = RepeatStatus {
        index: r,
        seed,
        trace: name,
        status: "failed".into(),
        error: None,
        trace_sha256: None,
        resumed_from: 0,
        final_x: None,
        final_p_true: None,
        warnings: Vec::new(),
    };
    let result = (|| -> Result<(relbo_core::harness::RunOutcome, Vec<String>)> {
        let (mut writer, done) = TraceWriter::open(&path, exp.run.problem.dim())?;
        let out = run_bo(&exp.run, r, seed, &done, &mut writer)?;
        Ok((out, writer.warnings))
    })();
    match result {
        Ok((out, warnings)) => {
            status.status = "complete".into();
            status.resumed_from = out.resumed_from;
            status.warnings = warnings;
            if let Some(cp) = out.final_checkpoint {
                status.final_x = Some(cp.x);
                status.final_p_true = Some(cp.p_true);
            }
        }
        Err(e) => status.error = Some(format!("{e:#}")),
    }
    if let Ok(bytes) = std::fs::read(&path) {
        status.trace_sha256 = Some(sha256_hex(&bytes));
    }
    status
}

/// Everything written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

impl ExperimentOutput {
    pub fn ok(&self) -> bool {
        self.manifest.failed.is_empty()
    }
}

/// Runs (or resumes) every repeat of `cfg` into `out` with `parallel` worker
/// threads and writes the manifest. Failed repeats are listed in the
/// manifest rather than returned as errors.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, parallel: usize) -> Result<ExperimentOutput> {
    let resolved = cfg.resolved()?;
    let exp = resolved.build()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest_path = out.join(MANIFEST);
    if manifest_path.exists() {
        let old = Manifest::load(&manifest_path)?;
        let mut a = old.config.clone();
        let mut b = resolved.clone();
        a.budget.repeats = None;
        b.budget.repeats = None;
        if a != b {
            bail!("{} holds results of a different configuration", out.display());
        }
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallel.max(1)).build()?;
    let repeats: Vec<RepeatStatus> =
        pool.install(|| (0..exp.repeats).into_par_iter().map(|r| run_repeat(&exp, r, out)).collect());
    let failed = repeats.iter().filter(|s| s.status != "complete").map(|s| s.index).collect();
    let p = &exp.run.problem;
    let manifest = Manifest {
        tool: "relbo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        problem: p.name.clone(),
        mode: p.mode.as_str().into(),
        algorithm: exp.label.clone(),
        dim: p.dim(),
        n0: p.n0,
        n_tot: exp.run.n_tot,
        config_sha256: resolved.hash()?,
        config: resolved,
        seeds: (0..exp.repeats).map(|r| exp.seed(r)).collect(),
        repeats,
        failed,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(&manifest_path, text).with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(ExperimentOutput { manifest, manifest_path })
}
