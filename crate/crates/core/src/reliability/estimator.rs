//! Importance-weighted qMC estimates of the expected failure probability.
//!
//! For a nominal design `x` and sample `u_i` with log weights `log w_i`,
//! `P̂ = (1/N) Σ w_i·Ĵ(x + u_i)` where `Ĵ = ι·Φ(t) + (1 − ι)`, `ι` is the
//! smoothed box indicator and `Φ(t)` the (posterior or path-based)
//! probability that the objective exceeds the threshold. Everything is
//! accumulated in log space.

use alloc::vec;
use alloc::vec::Vec;

use super::perturbation::IsSample;
use super::smoothing::log_smooth_feasibility;
use crate::domain::Bounds;
use crate::numerics::normal;
use crate::surrogate::{RffPath, Surrogate, Workspace};

/// How the value function `R` is derived from `P̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueScale {
    /// `R = −log P̂` (extremely small failure probabilities).
    Log,
    /// `R = −P̂` (moderate failure probabilities).
    Linear,
}

/// Result of one estimate. `value` is `R` (larger is more reliable) and
/// `grad` its gradient with respect to `x` (empty when not requested).
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub p_hat: f64,
    pub log_p: f64,
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Estimate {
    /// All terms underflowed: the design looks perfect.
    pub fn is_perfect(&self) -> bool {
        self.log_p == f64::NEG_INFINITY
    }
}

/// `log Ĵ` and the coefficients of `∇t` and `∇log ι` in `∇log Ĵ`.
#[inline]
pub(crate) fn log_j(log_iota: f64, t: f64) -> (f64, f64, f64) {
    if log_iota == 0.0 {
        let lj = normal::log_cdf(t);
        let ct = if t.is_finite() { normal::inverse_mills(t) } else { 0.0 };
        return (lj, ct, 0.0);
    }
    let lphi = normal::log_cdf(t);
    let l1m = libm::log(-libm::expm1(log_iota));
    let a = log_iota + lphi;
    let lj = log_add_exp(a, l1m);
    let ct = if t.is_finite() { libm::exp(log_iota + normal::log_pdf(t) - lj) } else { 0.0 };
    let ci = -libm::exp(log_iota + normal::log_cdf(-t) - lj);
    (lj, ct, ci)
}

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(libm::exp(a - m) + libm::exp(b - m))
}

/// Streaming log-sum-exp of terms with gradients.
#[derive(Debug, Clone)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
    grad: Vec<f64>,
}

impl LogSumExp {
    pub(crate) fn new(d: usize) -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0, grad: vec![0.0; d] }
    }

    #[inline]
    pub(crate) fn add(&mut self, l: f64, g: Option<&[f64]>) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            let scale = libm::exp(self.max - l);
            self.sum *= scale;
            self.grad.iter_mut().for_each(|v| *v *= scale);
            self.max = l;
        }
        let w = libm::exp(l - self.max);
        self.sum += w;
        if let Some(g) = g {
            for (a, b) in self.grad.iter_mut().zip(g) {
                *a += w * b;
            }
        }
    }

    /// `log Σ exp(l_i)` and the softmax-weighted gradient.
    pub(crate) fn finish(mut self) -> (f64, Vec<f64>) {
        if self.max == f64::NEG_INFINITY {
            self.grad.iter_mut().for_each(|v| *v = 0.0);
            return (f64::NEG_INFINITY, self.grad);
        }
        let inv = 1.0 / self.sum;
        self.grad.iter_mut().for_each(|v| *v *= inv);
        (self.max + libm::log(self.sum), self.grad)
    }
}

/// Converts `log P̂` and `∇log P̂` to an [`Estimate`].
pub(crate) fn finish_estimate(log_p: f64, mut grad: Vec<f64>, scale: ValueScale, want_grad: bool) -> Estimate {
    let p_hat = libm::exp(log_p);
    let value = match scale {
        ValueScale::Log => -log_p,
        ValueScale::Linear => -p_hat,
    };
    if want_grad {
        let f = match scale {
            ValueScale::Log => -1.0,
            ValueScale::Linear => -p_hat,
        };
        if log_p == f64::NEG_INFINITY {
            grad.iter_mut().for_each(|v| *v = 0.0);
        } else {
            grad.iter_mut().for_each(|v| *v *= f);
        }
    } else {
        grad.clear();
    }
    Estimate { p_hat, log_p, value, grad }
}

/// Shared estimator loop. `t_fn(y, grad)` returns the standardized exceedance
/// argument `t` at `y`, writing `∇t` (original units) when asked.
fn estimate_with<F>(
    x: &[f64],
    is: &IsSample,
    bounds: &Bounds,
    delta: f64,
    scale: ValueScale,
    want_grad: bool,
    mut t_fn: F,
) -> Estimate
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
{
    let d = x.len();
    let mut y = vec![0.0; d];
    let mut g_iota = vec![0.0; d];
    let mut g_t = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut acc = LogSumExp::new(if want_grad { d } else { 0 });
    for (u, &lw) in is.points.iter_rows().zip(&is.log_weights) {
        for j in 0..d {
            y[j] = x[j] + u[j];
        }
        let log_iota = log_smooth_feasibility(&y, bounds, delta, want_grad.then_some(&mut g_iota[..]));
        if log_iota == f64::NEG_INFINITY {
            // Outside the box: certain failure, Ĵ = 1, no dependence on x.
            if want_grad {
                g.iter_mut().for_each(|v| *v = 0.0);
                acc.add(lw, Some(&g));
            } else {
                acc.add(lw, None);
            }
            continue;
        }
        let t = t_fn(&y, want_grad.then_some(&mut g_t[..]));
        let (lj, ct, ci) = log_j(log_iota, t);
        if want_grad {
            for j in 0..d {
                g[j] = ct * g_t[j] + ci * g_iota[j];
            }
            acc.add(lw + lj, Some(&g));
        } else {
            acc.add(lw + lj, None);
        }
    }
    let (ls, grad) = acc.finish();
    let log_p = ls - libm::log(is.len() as f64);
    finish_estimate(log_p, grad, scale, want_grad)
}

/// `t = (μ_n(y) − c)/√k_n(y, y)` with gradient, in original units. A variance
/// at the floor gives the hard limit `±∞`.
#[inline]
pub(crate) fn posterior_t(gp: &Surrogate, y: &[f64], c: f64, ws: &mut Workspace, grad: Option<&mut [f64]>) -> f64 {
    let d = gp.dim();
    ws.ensure(gp.n(), d);
    let mut xn = core::mem::take(&mut ws.xn);
    gp.bounds.to_unit(y, &mut xn);
    let out = gp.output;
    let cs = out.forward(c);
    let t = match grad {
        None => {
            let mut k = core::mem::take(&mut ws.k);
            let mut v = core::mem::take(&mut ws.v);
            let (mu, var) = gp.predict_normalized(&xn, &mut k, &mut v);
            ws.k = k;
            ws.v = v;
            if var <= crate::surrogate::VARIANCE_FLOOR {
                hard_t(mu, cs)
            } else {
                (mu - cs) / libm::sqrt(var)
            }
        }
        Some(g) => {
            let mut dmu = core::mem::take(&mut ws.g);
            let mut dvar = core::mem::take(&mut ws.h);
            let (mu, var, floored) = gp.predict_normalized_grad(&xn, ws, &mut dmu, &mut dvar);
            let t = if floored {
                g[..d].iter_mut().for_each(|v| *v = 0.0);
                hard_t(mu, cs)
            } else {
                let sd = libm::sqrt(var);
                let t = (mu - cs) / sd;
                for j in 0..d {
                    g[j] = (dmu[j] / sd - 0.5 * t * dvar[j] / var) / gp.bounds.width(j);
                }
                t
            };
            ws.g = dmu;
            ws.h = dvar;
            t
        }
    };
    ws.xn = xn;
    t
}

#[inline]
fn hard_t(mu: f64, c: f64) -> f64 {
    if mu >= c { f64::INFINITY } else { f64::NEG_INFINITY }
}

/// Smoothed estimate of `P_n(x)` and `R_n(x)` under the GP posterior.
pub fn estimate_pn(
    gp: &Surrogate,
    x: &[f64],
    is: &IsSample,
    bounds: &Bounds,
    delta: f64,
    c: f64,
    scale: ValueScale,
    want_grad: bool,
) -> Estimate {
    let mut ws = gp.workspace();
    estimate_with(x, is, bounds, delta, scale, want_grad, |y, g| posterior_t(gp, y, c, &mut ws, g))
}

/// Thompson-path estimate `P̃(x)` with the threshold smoothed by `Φ((f̃ − c)/ρ)`.
pub fn estimate_ptilde(
    path: &RffPath,
    x: &[f64],
    is: &IsSample,
    bounds: &Bounds,
    delta: f64,
    rho: f64,
    c: f64,
    scale: ValueScale,
    want_grad: bool,
) -> Estimate {
    estimate_with(x, is, bounds, delta, scale, want_grad, |y, g| match g {
        None => (path.eval(y) - c) / rho,
        Some(g) => {
            let f = path.eval_grad(y, g);
            g.iter_mut().for_each(|v| *v /= rho);
            (f - c) / rho
        }
    })
}

/// `Φ_n(y; c) = Φ((μ_n(y) − c)/√k_n(y, y))` with its logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiN {
    pub p: f64,
    pub log_p: f64,
    /// `log(1 − Φ_n)`.
    pub log_q: f64,
    /// The posterior variance was at the floor and the hard indicator was used.
    pub degenerate: bool,
}

pub fn phi_n(gp: &Surrogate, y: &[f64], c: f64) -> PhiN {
    let mut ws = gp.workspace();
    let t = posterior_t(gp, y, c, &mut ws, None);
    PhiN { p: normal::cdf(t), log_p: normal::log_cdf(t), log_q: normal::log_sf(t), degenerate: t.is_infinite() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::reliability::perturbation::{draw_is_sample, PerturbationModel};
    use crate::surrogate::{GpHyperparams, OutputTransform};

    fn fitted() -> Surrogate {
        let pts = [[0.1, 0.1], [0.5, 0.3], [0.9, 0.2], [0.3, 0.8], [0.7, 0.7], [0.45, 0.5], [0.2, 0.45]];
        let x = Matrix::from_rows(&pts);
        let y: Vec<f64> = pts.iter().map(|p| (p[0] - 0.4).powi(2) + (p[1] - 0.4).powi(2)).collect();
        Surrogate::condition(Bounds::unit(2), &x, &y, GpHyperparams::new(1.0, vec![0.4, 0.4], 0.0)).unwrap()
    }

    #[test]
    fn log_j_limits() {
        let (l, _, _) = log_j(0.0, 0.0);
        assert!((l - libm::log(0.5)).abs() < 1e-15);
        let (l, ct, _) = log_j(0.0, f64::NEG_INFINITY);
        assert_eq!((l, ct), (f64::NEG_INFINITY, 0.0));
        let (l, _, _) = log_j(libm::log(0.25), f64::NEG_INFINITY);
        assert!((l - libm::log(0.75)).abs() < 1e-15);
    }

    #[test]
    fn prior_far_below_threshold() {
        let hp = GpHyperparams::new(1.0, vec![0.3, 0.3], -10.0);
        let gp = Surrogate::prior(Bounds::cube(2, -10.0, 10.0), hp, OutputTransform::IDENTITY);
        let p = PerturbationModel::isotropic(2, 0.1).unwrap();
        let is = draw_is_sample(&p, 3.0, 64, 1).unwrap();
        let e = estimate_pn(&gp, &[0.0, 0.0], &is, gp.bounds(), 0.1, 0.5, ValueScale::Log, false);
        assert!(e.p_hat < 1e-10 && e.value > 23.0, "{e:?}");
    }

    #[test]
    fn far_corner_always_fails() {
        let gp = fitted();
        let p = PerturbationModel::isotropic(2, 1.0).unwrap();
        let is = draw_is_sample(&p, 1.0, 64, 2).unwrap();
        let e = estimate_pn(&gp, &[5.0, 5.0], &is, gp.bounds(), 1e-6, 0.5, ValueScale::Log, true);
        assert!((e.p_hat - 1.0).abs() < 1e-12 && e.value.abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_differences() {
        let gp = fitted();
        let p = PerturbationModel::isotropic(2, 0.08).unwrap();
        let is = draw_is_sample(&p, 3.0, 64, 5).unwrap();
        for (scale, x) in [(ValueScale::Log, [0.42, 0.37]), (ValueScale::Linear, [0.2, 0.6]), (ValueScale::Log, [0.05, 0.5])] {
            let e = estimate_pn(&gp, &x, &is, gp.bounds(), 0.05, 0.12, scale, true);
            for j in 0..2 {
                let h = 1e-6;
                let (mut a, mut b) = (x, x);
                a[j] += h;
                b[j] -= h;
                let fa = estimate_pn(&gp, &a, &is, gp.bounds(), 0.05, 0.12, scale, false).value;
                let fb = estimate_pn(&gp, &b, &is, gp.bounds(), 0.05, 0.12, scale, false).value;
                let fd = (fa - fb) / (2.0 * h);
                assert!((fd - e.grad[j]).abs() <= 1e-4 * fd.abs().max(1e-3), "{scale:?} {j}: {fd} vs {}", e.grad[j]);
            }
        }
    }

    #[test]
    fn monotone_in_threshold() {
        let gp = fitted();
        let p = PerturbationModel::isotropic(2, 0.08).unwrap();
        let is = draw_is_sample(&p, 3.0, 128, 5).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let c = 0.02 * k as f64;
            let e = estimate_pn(&gp, &[0.4, 0.4], &is, gp.bounds(), 0.05, c, ValueScale::Log, false);
            assert!(e.p_hat <= last * (1.0 + 1e-12));
            last = e.p_hat;
        }
    }

    #[test]
    fn phi_n_examples() {
        let gp = fitted();
        let y = [0.6, 0.55];
        let mut ws = gp.workspace();
        let (m, v) = gp.predict(&y, &mut ws);
        assert!((phi_n(&gp, &y, m).p - 0.5).abs() < 1e-15);
        assert!((phi_n(&gp, &y, m - libm::sqrt(v)).p - 0.841_344_746_068_542_9).abs() < 1e-9);
        let far = phi_n(&gp, &y, m + 30.0 * libm::sqrt(v));
        assert!(far.log_p.is_finite() && (far.log_p + 454.32).abs() < 0.01);
    }
}
