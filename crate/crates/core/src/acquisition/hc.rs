//! Four-rule limit-state exploration baseline.
//!
//! Without feasible samples the probability of feasibility is maximized.
//! Otherwise limit-state exploration, tunneling and maximum variance are
//! tried in turn until one proposes a point at least `ε_s` away from every
//! existing sample.

use alloc::format;
use alloc::vec::Vec;

use super::common::{maximize_from_scan, normalized_distance, sobol_box};
use super::{AcquisitionSpec, Context, Proposal, Rule};
use crate::domain::Bounds;
use crate::error::Result;
use crate::linalg::{dist, Matrix};
use crate::numerics::normal;
use crate::numerics::seed::{derive, Purpose};
use crate::optimizers::direct_maximize;
use crate::reliability::posterior_t;
use crate::surrogate::{Prediction, Surrogate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HcRule {
    /// Probability of feasibility.
    Feasibility,
    /// Limit-state exploration.
    LimitState,
    /// Tunneling.
    Tunnel,
    /// Maximum variance.
    MaxVariance,
}

impl HcRule {
    pub fn as_str(self) -> &'static str {
        match self {
            HcRule::Feasibility => "F",
            HcRule::LimitState => "LS",
            HcRule::Tunnel => "TN",
            HcRule::MaxVariance => "MV",
        }
    }
}

/// Nearest sample (row index) and the normalized distance to it.
fn nearest(y: &[f64], samples: &Matrix, rows: &[usize], bounds: &Bounds) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &i in rows {
        let dd = normalized_distance(y, samples.row(i), bounds);
        if best.is_none_or(|(_, b)| dd < b) {
            best = Some((i, dd));
        }
    }
    best
}

/// `log α_F = log Φ((c − μ)/σ)` and its gradient.
fn log_feasibility(gp: &Surrogate, y: &[f64], c: f64, ws: &mut crate::surrogate::Workspace, grad: Option<&mut [f64]>) -> f64 {
    match grad {
        None => normal::log_cdf(-posterior_t(gp, y, c, ws, None)),
        Some(g) => {
            let t = posterior_t(gp, y, c, ws, Some(g));
            let k = if t.is_finite() { normal::inverse_mills(-t) } else { 0.0 };
            g.iter_mut().for_each(|v| *v *= -k);
            normal::log_cdf(-t)
        }
    }
}

/// `α_LS`: inside the band `|μ − c| ≤ Δ`, the normalized distance to the
/// nearest sample; zero outside.
pub(crate) fn alpha_ls(gp: &Surrogate, y: &[f64], c: f64, band: f64, samples: &Matrix, bounds: &Bounds, ws: &mut crate::surrogate::Workspace) -> f64 {
    let (mu, _) = gp.predict(y, ws);
    if (mu - c).abs() > band {
        return 0.0;
    }
    let all: Vec<usize> = (0..samples.rows()).collect();
    nearest(y, samples, &all, bounds).map_or(0.0, |(_, dd)| dd)
}

fn far_enough(y: &[f64], samples: &Matrix, eps_s: f64) -> bool {
    samples.iter_rows().all(|s| dist(y, s) >= eps_s)
}

pub fn hc_next(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Proposal> {
    let gp = ctx.surrogate()?;
    let bounds = &ctx.problem.bounds;
    let c = ctx.problem.threshold;
    let n = ctx.n as u64;
    let samples = ctx.inputs;
    let feasible: Vec<usize> = (0..ctx.values.len()).filter(|&i| ctx.values[i] <= c).collect();
    let cands = sobol_box(bounds, spec.n_raw, derive(ctx.seed, Purpose::Restarts, n))?;
    let mut ws = gp.workspace();

    if feasible.is_empty() {
        let best = maximize_from_scan(
            |y, g| log_feasibility(gp, y, c, &mut ws, g),
            bounds,
            &cands,
            &[],
            spec,
            derive(ctx.seed, Purpose::Restarts, n << 8 | 6),
        );
        return Ok(Proposal::new(best.x, best.value, Rule::Hc(HcRule::Feasibility)));
    }

    let ls = direct_maximize(|y| alpha_ls(gp, y, c, spec.band, samples, bounds, &mut ws), bounds, spec.direct_budget);
    if ls.value > 0.0 && far_enough(&ls.x, samples, spec.eps_s) {
        return Ok(Proposal::new(ls.x, ls.value, Rule::Hc(HcRule::LimitState)));
    }

    let tn = maximize_from_scan(
        |y, g| {
            let Some((i, dd)) = nearest(y, samples, &feasible, bounds) else {
                return f64::NEG_INFINITY;
            };
            if dd == 0.0 {
                if let Some(g) = g {
                    g.iter_mut().for_each(|v| *v = 0.0);
                }
                return f64::NEG_INFINITY;
            }
            match g {
                None => log_feasibility(gp, y, c, &mut ws, None) + libm::log(dd),
                Some(g) => {
                    let v = log_feasibility(gp, y, c, &mut ws, Some(&mut *g)) + libm::log(dd);
                    // ∇ log‖y − y_i‖ = (y − y_i)/‖y − y_i‖².
                    let s = samples.row(i);
                    let r2 = dd * dd * bounds.diagonal() * bounds.diagonal();
                    for j in 0..y.len() {
                        g[j] += (y[j] - s[j]) / r2;
                    }
                    v
                }
            }
        },
        bounds,
        &cands,
        &[],
        spec,
        derive(ctx.seed, Purpose::Restarts, n << 8 | 7),
    );
    if tn.value.is_finite() && far_enough(&tn.x, samples, spec.eps_s) {
        return Ok(Proposal::new(tn.x, libm::exp(tn.value), Rule::Hc(HcRule::Tunnel)));
    }

    let mut pred = Prediction::default();
    let mv = maximize_from_scan(
        |y, g| {
            gp.predict_grad(y, &mut ws, &mut pred);
            let sd = libm::sqrt(pred.var);
            if let Some(g) = g {
                for j in 0..y.len() {
                    g[j] = pred.dvar[j] / (2.0 * sd);
                }
            }
            sd
        },
        bounds,
        &cands,
        &[],
        spec,
        derive(ctx.seed, Purpose::Restarts, n << 8 | 8),
    );
    let mut p = Proposal::new(mv.x.clone(), mv.value, Rule::Hc(HcRule::MaxVariance));
    if !far_enough(&mv.x, samples, spec.eps_s) {
        p.warning = Some(format!("no rule produced a point at least {} from every sample", spec.eps_s));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::problems::{problem, Mode};
    use crate::surrogate::{GpHyperparams, OutputTransform};

    fn ctx_for<'a>(p: &'a crate::problems::Problem, gp: &'a Surrogate, x: &'a Matrix, v: &'a [f64]) -> Context<'a> {
        Context { problem: p, gp: Some(gp), inputs: x, values: v, seed: 1, n: v.len() }
    }

    #[test]
    fn no_feasible_samples_uses_f() {
        let p = problem("quadratic-2d", Mode::Extreme).unwrap();
        let x = Matrix::from_rows(&[[0.9, 0.9]]);
        let v = [1.0];
        let gp = Surrogate::condition(p.bounds.clone(), &x, &v, GpHyperparams::new(1.0, vec![0.2, 0.2], 1.0)).unwrap();
        let mut spec = AcquisitionSpec::defaults(super::super::AcquisitionKind::Hc, &p);
        spec.n_raw = 64;
        let out = hc_next(&ctx_for(&p, &gp, &x, &v), &spec).unwrap();
        assert_eq!(out.rule, Rule::Hc(HcRule::Feasibility));
        assert!(p.bounds.contains(&out.y));
    }

    #[test]
    fn empty_band_moves_on_to_tunneling() {
        let p = problem("quadratic-2d", Mode::Extreme).unwrap();
        let x = Matrix::from_rows(&[[0.3, 0.3]]);
        let v = [0.0];
        // Mean far above c + Δ everywhere except where it is pinned by data.
        let hp = GpHyperparams::new(1e-4, vec![0.05, 0.05], 5.0);
        let gp = Surrogate::prior(p.bounds.clone(), hp, OutputTransform::IDENTITY);
        let mut ws = gp.workspace();
        assert_eq!(alpha_ls(&gp, &[0.7, 0.2], p.threshold, p.hc.delta, &x, &p.bounds, &mut ws), 0.0);
        let mut spec = AcquisitionSpec::defaults(super::super::AcquisitionKind::Hc, &p);
        spec.n_raw = 64;
        let out = hc_next(&ctx_for(&p, &gp, &x, &v), &spec).unwrap();
        assert_ne!(out.rule, Rule::Hc(HcRule::LimitState));
    }

    #[test]
    fn limit_state_rule_matches_grid_scan() {
        // 1D: samples at 0.2 (feasible) and 0.8, a mean that crosses c at 0.5.
        use crate::problems::{HcParams, Objective, Problem};
        use crate::reliability::PerturbationModel;
        let p = Problem {
            name: "line".into(),
            objective: Objective::Quadratic,
            bounds: Bounds::unit(1),
            threshold: 0.0,
            perturbation: PerturbationModel::isotropic(1, 0.05).unwrap(),
            n0: 2,
            hc: HcParams { eps_s: 0.01, delta: 0.3 },
            mode: Mode::Extreme,
        };
        let x = Matrix::from_rows(&[[0.2], [0.8]]);
        let v = [-1.0, 1.0];
        let gp = Surrogate::condition(p.bounds.clone(), &x, &v, GpHyperparams::new(1.0, vec![0.5], 0.0)).unwrap();
        let mut ws = gp.workspace();
        let mut grid_best = (0.0, 0.0);
        for k in 0..=10_000 {
            let y = k as f64 / 10_000.0;
            let a = alpha_ls(&gp, &[y], 0.0, 0.3, &x, &p.bounds, &mut ws);
            if a > grid_best.1 {
                grid_best = (y, a);
            }
        }
        let r = direct_maximize(|y| alpha_ls(&gp, y, 0.0, 0.3, &x, &p.bounds, &mut ws), &p.bounds, 400);
        assert!(r.value >= grid_best.1 - 5e-3, "{r:?} vs {grid_best:?}");
        let spec = AcquisitionSpec { direct_budget: 400, n_raw: 64, ..AcquisitionSpec::defaults(super::super::AcquisitionKind::Hc, &p) };
        let out = hc_next(&ctx_for(&p, &gp, &x, &v), &spec).unwrap();
        assert_eq!(out.rule, Rule::Hc(HcRule::LimitState));
        assert!((out.y[0] - grid_best.0).abs() < 0.02, "{:?} vs {grid_best:?}", out.y);
    }
}
