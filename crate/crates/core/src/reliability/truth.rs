//! Ground-truth failure probability of a design under the true objective.

use alloc::vec;

use super::perturbation::{draw_is_sample_from, IsSample};
use crate::error::Result;
use crate::numerics::gaussian::uniform_dims;
use crate::numerics::SobolStream;
use crate::problems::Problem;

/// Importance-weighted qMC estimate with hard indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueFailure {
    /// Raw weighted mean; can exceed 1 slightly when weights exceed 1.
    pub raw: f64,
    /// Standard error of the weighted mean.
    pub std_error: f64,
}

impl TrueFailure {
    /// The estimate clamped to `[0, 1]`.
    pub fn clamped(&self) -> f64 {
        self.raw.clamp(0.0, 1.0)
    }
}

/// `(1/N) Σ w_i·1{y_i ∉ Y_feas or f(y_i) ≥ c}` with `y_i = x + u_i`.
pub fn evaluate_true_failure(problem: &Problem, x: &[f64], is: &IsSample) -> TrueFailure {
    evaluate_true_failure_with(|y| problem.value_unchecked(y), &problem.bounds, problem.threshold, x, is)
}

/// Same estimator for an arbitrary objective.
pub fn evaluate_true_failure_with<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    bounds: &crate::Bounds,
    c: f64,
    x: &[f64],
    is: &IsSample,
) -> TrueFailure {
    let mut acc = Moments::default();
    acc.add(&mut f, bounds, c, x, is);
    acc.finish()
}

/// Scores `x` against `n_u` importance draws generated chunk by chunk from
/// one scrambled stream, so the full sample never has to be held in memory.
/// Identical to drawing all `n_u` points at once.
pub fn evaluate_true_failure_streamed(problem: &Problem, x: &[f64], tau: f64, n_u: usize, seed: u64) -> Result<TrueFailure> {
    const CHUNK: usize = 1 << 14;
    let mut stream = SobolStream::scrambled(uniform_dims(problem.dim()), seed)?;
    let mut acc = Moments::default();
    let mut left = n_u;
    while left > 0 {
        let m = left.min(CHUNK);
        let is = draw_is_sample_from(&problem.perturbation, tau, m, &mut stream)?;
        acc.add(&mut |y: &[f64]| problem.value_unchecked(y), &problem.bounds, problem.threshold, x, &is);
        left -= m;
    }
    Ok(acc.finish())
}

#[derive(Debug, Default)]
struct Moments {
    s1: f64,
    s2: f64,
    n: usize,
}

impl Moments {
    fn add<F: FnMut(&[f64]) -> f64>(&mut self, f: &mut F, bounds: &crate::Bounds, c: f64, x: &[f64], is: &IsSample) {
        let d = x.len();
        let mut y = vec![0.0; d];
        for (u, &lw) in is.points.iter_rows().zip(&is.log_weights) {
            for j in 0..d {
                y[j] = x[j] + u[j];
            }
            let fail = !bounds.contains(&y) || f(&y) >= c;
            if fail {
                let w = libm::exp(lw);
                self.s1 += w;
                self.s2 += w * w;
            }
        }
        self.n += is.len();
    }

    fn finish(&self) -> TrueFailure {
        let n = self.n as f64;
        let mean = self.s1 / n;
        let var = if self.n > 1 { ((self.s2 / n - mean * mean) * n / (n - 1.0)).max(0.0) } else { 0.0 };
        TrueFailure { raw: mean, std_error: libm::sqrt(var / n) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{problem, Mode};
    use crate::reliability::perturbation::draw_is_sample;

    #[test]
    fn extreme_thresholds() {
        let mut p = problem("quadratic-2d", Mode::Extreme).unwrap();
        let is = draw_is_sample(&p.perturbation, 1.0, 4096, 9).unwrap();
        p.threshold = f64::INFINITY;
        assert_eq!(evaluate_true_failure(&p, &[0.5, 0.5], &is).raw, 0.0);
        p.threshold = f64::NEG_INFINITY;
        let all = evaluate_true_failure(&p, &[0.5, 0.5], &is);
        let mean_w: f64 = is.log_weights.iter().map(|l| libm::exp(*l)).sum::<f64>() / 4096.0;
        assert!((all.raw - mean_w).abs() < 1e-12);
        assert_eq!(all.clamped(), all.raw.min(1.0));
    }

    #[test]
    fn quadratic_against_closed_form() {
        // f = r² with r the distance to (0.3, 0.3); σ = 0.06 and c = 0.09 give
        // P(r ≥ 0.3) = exp(−0.09/(2·0.0036)) for the Rayleigh radius; the box
        // boundary at distance 0.3 adds mass only beyond that radius.
        let p = problem("quadratic-2d", Mode::Extreme).unwrap();
        let is = draw_is_sample(&p.perturbation, 3.0, 1 << 16, 4).unwrap();
        let r = evaluate_true_failure(&p, &[0.3, 0.3], &is);
        let want = libm::exp(-0.09 / (2.0 * 0.0036));
        assert!((r.raw - want).abs() < 4.0 * r.std_error.max(1e-9), "{r:?} vs {want}");
    }

    #[test]
    fn streamed_matches_single_draw() {
        let p = problem("branin-2d", Mode::Extreme).unwrap();
        let n = (1 << 14) + 1000;
        let is = draw_is_sample(&p.perturbation, 3.0, n, 21).unwrap();
        let x = [3.0, 3.0];
        let a = evaluate_true_failure(&p, &x, &is);
        let b = evaluate_true_failure_streamed(&p, &x, 3.0, n, 21).unwrap();
        assert!((a.raw - b.raw).abs() <= 1e-15 * a.raw.max(1e-300));
        assert!((a.std_error - b.std_error).abs() <= 1e-12 * a.std_error.max(1e-300));
    }
}
