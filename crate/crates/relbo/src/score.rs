//! Re-scoring the recommendations stored in a trace.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use relbo_core::numerics::seed::{derive, Purpose};
use relbo_core::reliability::evaluate_true_failure_streamed;

use crate::experiment::{Manifest, MANIFEST};
use crate::trace::{fmt_f64, read_trace};

/// One re-scored checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescored {
    pub n: usize,
    pub x: Vec<f64>,
    /// Value stored in the trace.
    pub p_trace: f64,
    pub p_true: f64,
    pub p_true_raw: f64,
    pub std_error: f64,
}

/// Re-scores every checkpoint of the trace at `path` with `n_u` ground-truth
/// samples. The problem is taken from the manifest next to the trace; the
/// seed defaults to the repeat's scoring seed.
pub fn rescore(path: &Path, n_u: usize, seed: Option<u64>) -> Result<Vec<Rescored>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let manifest = Manifest::load(&dir.join(MANIFEST)).context("the trace must sit next to its manifest")?;
    let exp = manifest.experiment()?;
    let trace = read_trace(path)?;
    let repeat = trace.records.first().map(|r| r.repeat).ok_or_else(|| anyhow!("{} is empty", path.display()))?;
    let seed = seed.unwrap_or_else(|| derive(exp.seed(repeat), Purpose::Score, 0));
    let tau = exp.run.acquisition.tau;
    trace
        .checkpoints()
        .map(|(n, cp)| {
            let t = evaluate_true_failure_streamed(&exp.run.problem, &cp.x, tau, n_u, seed)?;
            Ok(Rescored {
                n,
                x: cp.x.clone(),
                p_trace: cp.p_true,
                p_true: t.clamped(),
                p_true_raw: t.raw,
                std_error: t.std_error,
            })
        })
        .collect()
}

pub fn render(rows: &[Rescored]) -> String {
    let d = rows.first().map_or(0, |r| r.x.len());
    let mut out = String::from("n");
    for j in 1..=d {
        out.push_str(&format!(",x_rec_{j}"));
    }
    out.push_str(",p_true_trace,p_true,p_true_raw,std_error\n");
    for r in rows {
        out.push_str(&r.n.to_string());
        for &x in &r.x {
            out.push(',');
            out.push_str(&fmt_f64(x));
        }
        for v in [r.p_trace, r.p_true, r.p_true_raw, r.std_error] {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}
