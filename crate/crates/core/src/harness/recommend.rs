//! Recommendation: the design that minimizes the predicted failure
//! probability `P̂_n`.

use alloc::vec::Vec;

use crate::acquisition::AcquisitionSpec;
use crate::error::Result;
use crate::linalg::Matrix;
use crate::numerics::seed::{derive, Purpose};
use crate::numerics::SobolStream;
use crate::optimizers::{argmax, boltzmann_restarts, minimize, multistart_maximize, QnOptions};
use crate::problems::Problem;
use crate::reliability::{draw_is_sample, estimate_pn, smooth_feasibility, IsSample, ValueScale};
use crate::surrogate::Surrogate;

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendSpec {
    pub n_candidates: usize,
    pub n_restarts: usize,
    /// Importance sample size for the scan and the multistart polish.
    pub n_u: usize,
    /// Sample size for the final fine-tuning step.
    pub n_u_fine: usize,
    /// Fine-tuning runs only when the dimension exceeds this.
    pub fine_above_dim: usize,
    pub qn: QnOptions,
    pub temperature: Option<f64>,
}

impl Default for RecommendSpec {
    fn default() -> Self {
        Self {
            n_candidates: 1024,
            n_restarts: 10,
            n_u: 1024,
            n_u_fine: 131_072,
            fine_above_dim: 2,
            qn: QnOptions::default(),
            temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub x: Vec<f64>,
    /// `P̂_n(x)` under the last importance sample used.
    pub p_hat: f64,
    /// Every candidate looked perfect; `x` maximizes the feasible mass
    /// instead.
    pub flagged: bool,
}

fn sobol_candidates(problem: &Problem, count: usize, seed: u64) -> Result<Matrix> {
    let d = problem.dim();
    let mut s = SobolStream::scrambled(d, seed)?;
    let mut m = s.points(count)?;
    let mut y = alloc::vec![0.0; d];
    for i in 0..count {
        problem.bounds.from_unit(m.row(i), &mut y);
        m.row_mut(i).copy_from_slice(&y);
    }
    Ok(m)
}

/// Weighted mass of `x ⊕ u` inside the smoothed box.
fn feasible_mass(problem: &Problem, x: &[f64], is: &IsSample, delta: f64) -> f64 {
    let mut y = alloc::vec![0.0; x.len()];
    let mut s = 0.0;
    for (u, &lw) in is.points.iter_rows().zip(&is.log_weights) {
        problem.perturbation.combine(x, u, &mut y);
        s += libm::exp(lw) * smooth_feasibility(&y, &problem.bounds, delta);
    }
    s
}

/// Minimizes `P̂_n` (maximizes `−log P̂_n`) after `n` observations. `tau` and
/// `delta` follow the acquisition spec.
pub fn recommend(gp: &Surrogate, problem: &Problem, acq: &AcquisitionSpec, spec: &RecommendSpec, seed: u64, n: usize) -> Result<Recommendation> {
    let n = n as u64;
    let c = problem.threshold;
    let bounds = &problem.bounds;
    let delta = acq.delta;
    let is = draw_is_sample(&problem.perturbation, acq.tau, spec.n_u, derive(seed, Purpose::Recommend, n))?;
    let cands = sobol_candidates(problem, spec.n_candidates, derive(seed, Purpose::Recommend, n << 8 | 1))?;
    let r = |x: &[f64], is: &IsSample| estimate_pn(gp, x, is, bounds, delta, c, ValueScale::Log, false).value;
    let values: Vec<f64> = cands.iter_rows().map(|x| r(x, &is)).collect();

    if let Some(first) = argmax(&values).filter(|&i| values[i] == f64::INFINITY) {
        // Several designs may look perfect; prefer the most feasible one.
        let perfect: Vec<usize> = (0..values.len()).filter(|&i| values[i] == f64::INFINITY).collect();
        let mut best = (first, f64::NEG_INFINITY);
        for &i in &perfect {
            let m = feasible_mass(problem, cands.row(i), &is, delta);
            if m > best.1 {
                best = (i, m);
            }
        }
        return Ok(Recommendation { x: cands.row(best.0).to_vec(), p_hat: 0.0, flagged: perfect.len() == values.len() });
    }

    let picks = boltzmann_restarts(&values, spec.n_restarts, spec.temperature, derive(seed, Purpose::Recommend, n << 8 | 2));
    let starts: Vec<Vec<f64>> = picks.iter().map(|&i| cands.row(i).to_vec()).collect();
    let grad_fn = |x: &[f64], g: &mut [f64], is: &IsSample| {
        let e = estimate_pn(gp, x, is, bounds, delta, c, ValueScale::Log, true);
        g.copy_from_slice(&e.grad);
        e.value
    };
    let best_i = argmax(&values).unwrap_or(0);
    let mut x = cands.row(best_i).to_vec();
    let mut value = values[best_i];
    if let Some(m) = multistart_maximize(|x, g| grad_fn(x, g, &is), &starts, bounds, &spec.qn) {
        if m.value > value {
            x = m.x;
            value = m.value;
        }
    }
    if value == f64::INFINITY {
        return Ok(Recommendation { x, p_hat: 0.0, flagged: false });
    }
    let mut p_hat = libm::exp(-value);
    if problem.dim() > spec.fine_above_dim {
        let fine = draw_is_sample(&problem.perturbation, acq.tau, spec.n_u_fine, derive(seed, Purpose::Recommend, n << 8 | 3))?;
        let neg = |x: &[f64], g: &mut [f64]| {
            let v = grad_fn(x, g, &fine);
            g.iter_mut().for_each(|v| *v = -*v);
            -v
        };
        let polished = minimize(neg, &x, bounds, &spec.qn);
        x = polished.x;
        p_hat = libm::exp(polished.value);
    }
    Ok(Recommendation { x, p_hat, flagged: false })
}
