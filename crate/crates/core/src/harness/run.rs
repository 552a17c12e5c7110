//! The outer BO loop with resumable, append-only trace records.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::recommend::{recommend, RecommendSpec};
use crate::acquisition::{design_point, propose, AcquisitionSpec, Context};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::numerics::seed::{derive, Purpose};
use crate::problems::Problem;
use crate::reliability::evaluate_true_failure_streamed;
use crate::surrogate::{fit_map, FitOptions, GpHyperparams, Surrogate};

/// Ground-truth sample size for scoring recommendations.
pub const SCORE_SAMPLES: usize = 1 << 20;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub acquisition: AcquisitionSpec,
    pub n_tot: usize,
    pub recommend: RecommendSpec,
    /// Recommend and score every `checkpoint_stride` evaluations after the
    /// initial design; the first and last evaluation counts always are.
    pub checkpoint_stride: usize,
    pub score_samples: usize,
    pub fit: FitOptions,
}

impl RunConfig {
    pub fn new(problem: Problem, acquisition: AcquisitionSpec, n_tot: usize) -> Self {
        Self {
            problem,
            acquisition,
            n_tot,
            recommend: RecommendSpec::default(),
            checkpoint_stride: 1,
            score_samples: SCORE_SAMPLES,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        if self.problem.n0 == 0 || self.problem.n0 > self.n_tot {
            return Err(Error::Config(format!("n_tot = {} must be at least n_0 = {}", self.n_tot, self.problem.n0)));
        }
        if self.checkpoint_stride == 0 || self.score_samples == 0 {
            return Err(Error::Config("checkpoint stride and score sample size must be positive".into()));
        }
        if self.recommend.n_candidates == 0 || self.recommend.n_restarts == 0 || self.recommend.n_u == 0 {
            return Err(Error::Config("recommendation sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn is_checkpoint(&self, n: usize) -> bool {
        let n0 = self.problem.n0;
        n == self.n_tot || (n >= n0 && (n - n0) % self.checkpoint_stride == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Iter,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Iter => "iter",
            Phase::Done => "done",
        }
    }
}

impl core::str::FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "init" => Ok(Phase::Init),
            "iter" => Ok(Phase::Iter),
            "done" => Ok(Phase::Done),
            _ => Err(Error::Config(format!("unknown trace phase `{s}`"))),
        }
    }
}

/// A scored recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub x: Vec<f64>,
    pub p_hat: f64,
    /// True failure probability clamped to `[0, 1]`.
    pub p_true: f64,
    /// Unclamped estimate and its standard error.
    pub p_true_raw: f64,
    pub p_true_se: f64,
}

/// One row of a trace: the `n`-th observation, how it was chosen, and the
/// recommendation from the first `n` observations when `n` is a checkpoint.
/// The final `Done` row only marks completion.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub repeat: usize,
    pub n: usize,
    pub phase: Phase,
    pub y: Vec<f64>,
    pub v: f64,
    pub acq_value: f64,
    pub rule: String,
    pub checkpoint: Option<Checkpoint>,
    pub wall_ms: f64,
}

/// Receives trace rows as they are produced.
pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()>;

    /// A recoverable problem worth reporting.
    fn warn(&mut self, _repeat: usize, _n: usize, _message: &str) {}
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// The first `n_0` points of the run's scrambled Sobol' design and their
/// values.
pub fn initial_design(problem: &Problem, seed: u64) -> Result<(Matrix, Vec<f64>)> {
    let mut x = Matrix::zeros(0, problem.dim());
    let mut v = Vec::with_capacity(problem.n0);
    for i in 0..problem.n0 {
        let y = design_point(&problem.bounds, seed, i)?;
        v.push(problem.evaluate(&y)?);
        x.push_row(&y);
    }
    Ok((x, v))
}

fn fit(cfg: &RunConfig, x: &Matrix, v: &[f64], seed: u64, n: usize, warm: Option<&GpHyperparams>) -> Result<Surrogate> {
    let b = &cfg.problem.bounds;
    fit_map(b, x, v, derive(seed, Purpose::Fit, n as u64), warm, &cfg.fit)
        .or_else(|_| fit_map(b, x, v, derive(seed, Purpose::Fit, n as u64 | 1 << 40), None, &cfg.fit))
}

/// Recommends from `gp` and scores the result against the true objective.
pub fn checkpoint(cfg: &RunConfig, gp: &Surrogate, seed: u64, n: usize) -> Result<(Checkpoint, bool)> {
    let p = &cfg.problem;
    let rec = recommend(gp, p, &cfg.acquisition, &cfg.recommend, seed, n)?;
    let t = evaluate_true_failure_streamed(p, &rec.x, cfg.acquisition.tau, cfg.score_samples, derive(seed, Purpose::Score, 0))?;
    let cp = Checkpoint { x: rec.x, p_hat: rec.p_hat, p_true: t.clamped(), p_true_raw: t.raw, p_true_se: t.std_error };
    Ok((cp, rec.flagged))
}

/// Checks that `done` holds the consecutive rows `1..=m` of this repeat and
/// returns `m`, or `None` when the trace is already complete.
fn validate_resume(cfg: &RunConfig, repeat: usize, seed: u64, done: &[TraceRecord]) -> Result<Option<usize>> {
    let bad = |msg: String| Err(Error::Config(format!("cannot resume repeat {repeat}: {msg}")));
    for (i, r) in done.iter().enumerate() {
        if r.repeat != repeat {
            return bad(format!("row {} belongs to repeat {}", i + 1, r.repeat));
        }
        if r.phase == Phase::Done {
            if i + 1 != done.len() || r.n != cfg.n_tot {
                return bad("completion marker out of place".into());
            }
            return Ok(None);
        }
        if r.n != i + 1 {
            return bad(format!("expected row n = {}, found {}", i + 1, r.n));
        }
        let want = if r.n <= cfg.problem.n0 { Phase::Init } else { Phase::Iter };
        if r.phase != want || r.y.len() != cfg.problem.dim() {
            return bad(format!("row n = {} is malformed", r.n));
        }
        if r.n <= cfg.problem.n0 && r.y != design_point(&cfg.problem.bounds, seed, r.n - 1)? {
            return bad("initial design does not match the seed".into());
        }
    }
    if done.len() > cfg.n_tot {
        return bad("more rows than the budget".into());
    }
    Ok(Some(done.len()))
}

/// Summary of a finished repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub final_checkpoint: Option<Checkpoint>,
    /// Rows written by this call (excluding rows carried over on resume).
    pub rows_written: usize,
    pub resumed_from: usize,
}

/// Runs (or resumes) one repeat with repeat seed `seed`.
///
/// `done` holds the rows of an interrupted run of the same configuration.
/// Fits are replayed to recover the warm-start chain, so a resumed trace is
/// identical to an uninterrupted one.
pub fn run_bo(cfg: &RunConfig, repeat: usize, seed: u64, done: &[TraceRecord], sink: &mut dyn TraceSink) -> Result<RunOutcome> {
    cfg.validate()?;
    let p = &cfg.problem;
    let n0 = p.n0;
    let Some(m) = validate_resume(cfg, repeat, seed, done)? else {
        let last = done.iter().rev().find_map(|r| r.checkpoint.clone());
        return Ok(RunOutcome { final_checkpoint: last, rows_written: 0, resumed_from: done.len() });
    };
    let (mut x, mut v) = initial_design(p, seed)?;
    let mut written = 0;
    let row = |n: usize, x: &Matrix, v: &[f64], acq: f64, rule: &str, cp: Option<Checkpoint>| TraceRecord {
        repeat,
        n,
        phase: if n <= n0 { Phase::Init } else { Phase::Iter },
        y: x.row(n - 1).to_vec(),
        v: v[n - 1],
        acq_value: acq,
        rule: rule.to_string(),
        checkpoint: cp,
        wall_ms: 0.0,
    };
    for n in (m + 1)..n0 {
        sink.record(&row(n, &x, &v, f64::NAN, "init", None))?;
        written += 1;
    }

    let mut warm: Option<GpHyperparams> = None;
    let mut last_acq = (f64::NAN, String::from("init"));
    let mut final_cp = None;
    for n in n0..=cfg.n_tot {
        let gp = fit(cfg, &x, &v, seed, n, warm.as_ref())?;
        warm = Some(gp.hyperparams().clone());
        if n > m {
            let cp = if cfg.is_checkpoint(n) {
                let (cp, flagged) = checkpoint(cfg, &gp, seed, n)?;
                if flagged {
                    sink.warn(repeat, n, "every recommendation candidate looked perfect");
                }
                Some(cp)
            } else {
                None
            };
            if n == cfg.n_tot {
                final_cp = cp.clone();
            }
            sink.record(&row(n, &x, &v, last_acq.0, &last_acq.1, cp))?;
            written += 1;
        }
        if n == cfg.n_tot {
            break;
        }
        if n < m {
            // Replay the recorded observation; the fit chain above must see
            // exactly the data it saw in the original run.
            let r = &done[n];
            p.bounds.check(&r.y)?;
            x.push_row(&r.y);
            v.push(r.v);
            continue;
        }
        let ctx = Context { problem: p, gp: Some(&gp), inputs: &x, values: &v, seed, n };
        let prop = propose(&ctx, &cfg.acquisition)?;
        if let Some(w) = &prop.warning {
            sink.warn(repeat, n + 1, w);
        }
        let value = p.evaluate(&prop.y)?;
        x.push_row(&prop.y);
        v.push(value);
        last_acq = (prop.value, prop.rule.as_str().to_string());
    }
    sink.record(&TraceRecord {
        repeat,
        n: cfg.n_tot,
        phase: Phase::Done,
        y: Vec::new(),
        v: f64::NAN,
        acq_value: f64::NAN,
        rule: String::new(),
        checkpoint: None,
        wall_ms: 0.0,
    })?;
    written += 1;
    Ok(RunOutcome { final_checkpoint: final_cp, rows_written: written, resumed_from: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::AcquisitionKind;
    use crate::problems::{problem, Mode};

    fn quick(kind: AcquisitionKind, n_tot: usize) -> RunConfig {
        let p = problem("quadratic-2d", Mode::NonExtreme).unwrap();
        let mut acq = AcquisitionSpec::defaults(kind, &p);
        acq.n_raw = 64;
        acq.n_restarts = 2;
        let mut cfg = RunConfig::new(p, acq, n_tot);
        cfg.recommend = RecommendSpec { n_candidates: 64, n_u: 64, n_restarts: 2, ..RecommendSpec::default() };
        cfg.score_samples = 1 << 12;
        cfg.checkpoint_stride = 4;
        cfg
    }

    #[test]
    fn sobol_trace_shape() {
        let cfg = quick(AcquisitionKind::Sobol, 20);
        let mut rows: Vec<TraceRecord> = Vec::new();
        let out = run_bo(&cfg, 0, 7, &[], &mut rows).unwrap();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows.iter().filter(|r| r.phase == Phase::Iter).count(), 14);
        assert_eq!(rows.last().unwrap().phase, Phase::Done);
        let cps: Vec<usize> = rows.iter().filter(|r| r.checkpoint.is_some()).map(|r| r.n).collect();
        assert_eq!(cps, [6, 10, 14, 18, 20]);
        let fin = out.final_checkpoint.unwrap();
        assert!((0.0..=1.0).contains(&fin.p_true));
        // Sobol' continues the initial design stream.
        for r in &rows[..20] {
            assert_eq!(r.y, design_point(&cfg.problem.bounds, 7, r.n - 1).unwrap());
        }
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let cfg = quick(AcquisitionKind::Egra, 12);
        let mut full: Vec<TraceRecord> = Vec::new();
        run_bo(&cfg, 2, 11, &[], &mut full).unwrap();
        let mut again: Vec<TraceRecord> = Vec::new();
        run_bo(&cfg, 2, 11, &[], &mut again).unwrap();
        assert_eq!(format!("{again:?}"), format!("{full:?}"), "fresh runs differ");
        for cut in [3, 6, 9, 12] {
            let mut rest: Vec<TraceRecord> = Vec::new();
            let out = run_bo(&cfg, 2, 11, &full[..cut], &mut rest).unwrap();
            assert_eq!(out.resumed_from, cut);
            let mut joined = full[..cut].to_vec();
            joined.extend(rest);
            // NaN fields rule out `==`; the debug form is exact for floats.
            assert_eq!(format!("{joined:?}"), format!("{full:?}"), "cut at {cut}");
        }
        let mut none: Vec<TraceRecord> = Vec::new();
        assert_eq!(run_bo(&cfg, 2, 11, &full, &mut none).unwrap().rows_written, 0);
        assert!(run_bo(&cfg, 2, 12, &full[..4], &mut none).is_err());
    }
}
