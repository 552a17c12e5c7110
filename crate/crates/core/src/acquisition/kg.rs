//! Knowledge gradient for maximal reliability.
//!
//! A fantasy observation `v = μ_n(y) + z·√k_n(y, y)` changes the posterior at
//! any point `p` through a rank-one update, so `R̂_{n+1}(x; y, z)` can be
//! evaluated without refactorizing: with `c = k_n(p, y)` and
//! `D = k_n(y, y) + σ²`, the fantasy mean is `μ_n(p) + c·z·√k_n(y, y)/D` and
//! the fantasy variance `k_n(p, p) − c²/D`.
//!
//! [`DiscreteKg`] caches the posterior over a fixed discretization shifted by
//! the importance sample and evaluates the discrete approximation with its
//! gradient in `y`. [`OneShotKg`] is the joint objective over
//! `(y, x_1, …, x_{N_v})`.

use alloc::vec;
use alloc::vec::Vec;

use super::common::{maximize_from_scan, sobol_box};
use super::{AcquisitionSpec, Context, Proposal, Rule};
use crate::domain::Bounds;
use crate::error::Result;
use crate::linalg::{dot, Matrix};
use crate::numerics::gaussian::standard_normals;
use crate::numerics::normal;
use crate::numerics::seed::{derive, Purpose};
use crate::optimizers::{argmax, boltzmann_restarts, minimize, multistart_maximize};
use crate::reliability::{
    draw_is_sample, estimate_pn, finish_estimate, log_j, log_smooth_feasibility, IsSample, LogSumExp,
    ValueScale,
};
use crate::surrogate::{Surrogate, VARIANCE_FLOOR};

const SCAN_DISCRETE: u64 = 9;
const SCAN_ONESHOT: u64 = 10;
const PICK_ONESHOT: u64 = 11;
const PICK_DISCRETE: u64 = 12;

/// Below this the linear-space sum of a failure probability is recomputed in
/// log space.
const LINEAR_UNDERFLOW: f64 = 1e-250;

/// Rank-one update data for a fantasy observation at `y`.
#[derive(Debug, Clone)]
struct Fantasy {
    /// Normalized location.
    yn: Vec<f64>,
    /// `L⁻¹k(X, y)`.
    w: Vec<f64>,
    /// `K⁻¹k(X, y)`.
    gamma: Vec<f64>,
    /// `√k_n(y, y)`.
    sy: f64,
    /// Schur complement `k_n(y, y) + σ² + jitter`.
    dd: f64,
    /// False when the variance at `y` is at the floor; the fantasy then
    /// leaves the posterior unchanged.
    informative: bool,
    /// Rows `∂k(y, X_i)/∂y` (normalized), `n × d`; empty unless requested.
    dk: Vec<f64>,
    /// `∂k_n(y, y)/∂y` (normalized).
    dvar: Vec<f64>,
}

impl Fantasy {
    fn new(gp: &Surrogate, y: &[f64], want_grad: bool) -> Self {
        let (n, d) = (gp.n(), gp.dim());
        let mut yn = vec![0.0; d];
        gp.bounds.to_unit(y, &mut yn);
        let mut k = vec![0.0; n];
        let mut dk = if want_grad { vec![0.0; n * d] } else { Vec::new() };
        for i in 0..n {
            k[i] = if want_grad {
                gp.kern.eval_grad(&yn, gp.x.row(i), &mut dk[i * d..(i + 1) * d])
            } else {
                gp.kern.eval(&yn, gp.x.row(i))
            };
        }
        let mut w = k;
        gp.chol.solve_lower_in_place(&mut w);
        let raw = gp.kern.s2 - dot(&w, &w);
        let mut gamma = w.clone();
        gp.chol.solve_upper_in_place(&mut gamma);
        let informative = raw > VARIANCE_FLOOR;
        let var = raw.max(VARIANCE_FLOOR);
        let dd = raw + gp.hp.noise_variance + gp.chol.jitter();
        let mut dvar = vec![0.0; d];
        if want_grad && informative {
            for i in 0..n {
                let row = &dk[i * d..(i + 1) * d];
                for j in 0..d {
                    dvar[j] -= 2.0 * gamma[i] * row[j];
                }
            }
        }
        Self { yn, w, gamma, sy: libm::sqrt(var), dd, informative, dk, dvar }
    }
}

/// `t` after the fantasy and the coefficients `A`, `B` of
/// `∂t/∂y = A·∂c/∂y + B·∂k_n(y, y)/∂y`. A variance at the floor gives the hard
/// limit with zero coefficients.
#[inline]
fn fantasy_t(mu_minus_c: f64, var_raw: f64, c: f64, z: f64, f: &Fantasy) -> (f64, f64, f64) {
    let (sy, dd) = (f.sy, f.dd);
    let m = mu_minus_c + c * z * sy / dd;
    let v = var_raw - c * c / dd;
    if v <= VARIANCE_FLOOR {
        return (if m >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }, 0.0, 0.0);
    }
    let s = libm::sqrt(v);
    let t = m / s;
    if !f.informative {
        return (t, 0.0, 0.0);
    }
    let a = z * sy / (dd * s) + t * c / (dd * v);
    let b = z * c * (0.5 / (sy * dd) - sy / (dd * dd)) / s - t * c * c / (2.0 * v * dd * dd);
    (t, a, b)
}

/// `R` from `log P̂`.
#[inline]
fn value_of(log_p: f64, scale: ValueScale) -> f64 {
    match scale {
        ValueScale::Log => -log_p,
        ValueScale::Linear => -libm::exp(log_p),
    }
}

/// Outcome of a discrete KG evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEval {
    /// `α̂_n(y)`; `+∞` when some fantasy reaches a perfect design.
    pub value: f64,
    /// `max_x R̂_{n+1}(x; y, z_i)` per fantasy.
    pub best_values: Vec<f64>,
    /// Index into the discretization of each maximizer.
    pub best_index: Vec<usize>,
}

/// Discrete KG over a fixed discretization, fantasies and importance sample.
#[derive(Debug, Clone)]
pub struct DiscreteKg<'a> {
    gp: &'a Surrogate,
    scale: ValueScale,
    z: Vec<f64>,
    n_x: usize,
    n_u: usize,
    ln_nu: f64,
    /// Per point `x_i + u_k` (index `i·n_u + k`): whether it carries model
    /// dependence (`ι > 0`), its normalized location and posterior.
    live: Vec<bool>,
    pn: Matrix,
    mu_minus_c: Vec<f64>,
    var_raw: Vec<f64>,
    /// `L⁻¹k(X, p)` rows.
    v: Matrix,
    /// `log w_k + log ι`, and `log w_k + log(1 − ι)` for the part that fails
    /// regardless of the model.
    log_live: Vec<f64>,
    log_dead: Vec<f64>,
    /// `exp(log_live)` per point and the summed dead mass per design.
    w_live: Vec<f64>,
    dead_mass: Vec<f64>,
    baseline: f64,
    baseline_index: usize,
}

impl<'a> DiscreteKg<'a> {
    /// Precomputes the posterior over `x_disc ⊕ is`. `delta = 0` uses the
    /// exact box indicator.
    pub fn new(
        gp: &'a Surrogate,
        threshold: f64,
        x_disc: &Matrix,
        is: &IsSample,
        z: &[f64],
        bounds: &Bounds,
        delta: f64,
        scale: ValueScale,
    ) -> Self {
        let (n, d) = (gp.n(), gp.dim());
        let (n_x, n_u) = (x_disc.rows(), is.len());
        let total = n_x * n_u;
        let cs = gp.output.forward(threshold);
        let mut live = vec![false; total];
        let mut pn = Matrix::zeros(total, d);
        let mut mu_minus_c = vec![0.0; total];
        let mut var_raw = vec![0.0; total];
        let mut v = Matrix::zeros(total, n);
        let mut log_live = vec![f64::NEG_INFINITY; total];
        let mut log_dead = vec![f64::NEG_INFINITY; total];
        let mut y = vec![0.0; d];
        for i in 0..n_x {
            let x = x_disc.row(i);
            for (k, (u, &lw)) in is.points.iter_rows().zip(&is.log_weights).enumerate() {
                let p = i * n_u + k;
                for j in 0..d {
                    y[j] = x[j] + u[j];
                }
                let li = log_smooth_feasibility(&y, bounds, delta, None);
                if li == f64::NEG_INFINITY {
                    log_dead[p] = lw;
                    continue;
                }
                live[p] = true;
                log_live[p] = lw + li;
                if li < 0.0 {
                    log_dead[p] = lw + libm::log(-libm::expm1(li));
                }
                gp.bounds.to_unit(&y, pn.row_mut(p));
                let row = v.row_mut(p);
                for r in 0..n {
                    row[r] = gp.kern.eval(pn.row(p), gp.x.row(r));
                }
                let mu = gp.hp.constant_mean + dot(row, &gp.alpha);
                gp.chol.solve_lower_in_place(row);
                mu_minus_c[p] = mu - cs;
                var_raw[p] = gp.kern.s2 - dot(row, row);
            }
        }
        let w_live: Vec<f64> = log_live.iter().map(|&l| libm::exp(l)).collect();
        let dead_mass: Vec<f64> =
            (0..n_x).map(|i| log_dead[i * n_u..(i + 1) * n_u].iter().map(|&l| libm::exp(l)).sum()).collect();
        let mut kg = Self {
            gp,
            scale,
            z: z.to_vec(),
            n_x,
            n_u,
            ln_nu: libm::log(n_u as f64),
            live,
            pn,
            mu_minus_c,
            var_raw,
            v,
            log_live,
            log_dead,
            w_live,
            dead_mass,
            baseline: f64::NEG_INFINITY,
            baseline_index: 0,
        };
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..n_x {
            let r = kg.r_of(i, |p| {
                let var = kg.var_raw[p];
                if var <= VARIANCE_FLOOR {
                    hard(kg.mu_minus_c[p])
                } else {
                    kg.mu_minus_c[p] / libm::sqrt(var)
                }
            });
            if r > best.1 || (i == 0 && r.is_nan()) {
                best = (i, r);
            }
        }
        kg.baseline_index = best.0;
        kg.baseline = best.1;
        kg
    }

    /// `max_{x ∈ X_disc} R̂_n(x)`.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn baseline_index(&self) -> usize {
        self.baseline_index
    }

    /// `R̂` of discretization point `i` given `t` per point.
    #[inline]
    fn r_of<T: Fn(usize) -> f64>(&self, i: usize, t: T) -> f64 {
        let base = i * self.n_u;
        let mut lin = self.dead_mass[i];
        for p in base..base + self.n_u {
            if self.live[p] {
                lin += self.w_live[p] * normal::cdf(t(p));
            }
        }
        let log_p = if lin > LINEAR_UNDERFLOW {
            libm::log(lin) - self.ln_nu
        } else {
            let mut acc = LogSumExp::new(0);
            for p in base..base + self.n_u {
                acc.add(self.log_dead[p], None);
                if self.live[p] {
                    acc.add(self.log_live[p] + normal::log_cdf(t(p)), None);
                }
            }
            acc.finish().0 - self.ln_nu
        };
        value_of(log_p, self.scale)
    }

    fn covariances(&self, f: &Fantasy) -> Vec<f64> {
        let total = self.n_x * self.n_u;
        let mut c = vec![0.0; total];
        if !f.informative {
            return c;
        }
        for p in 0..total {
            if self.live[p] {
                c[p] = self.gp.kern.eval(self.pn.row(p), &f.yn) - dot(self.v.row(p), &f.w);
            }
        }
        c
    }

    /// Evaluates the discrete approximation at `y`.
    pub fn evaluate(&self, y: &[f64]) -> DiscreteEval {
        let f = Fantasy::new(self.gp, y, false);
        self.evaluate_with(&f)
    }

    fn evaluate_with(&self, f: &Fantasy) -> DiscreteEval {
        let total = self.n_x * self.n_u;
        let c = self.covariances(f);
        // t(p, z) = (μ − c_s + c·(sy/D)·z)/s with s the fantasy sd.
        let k = f.sy / f.dd;
        let mut inv_s = vec![0.0; total];
        let mut hard_pt = vec![false; total];
        for p in 0..total {
            if self.live[p] {
                let v = self.var_raw[p] - c[p] * c[p] / f.dd;
                if v <= VARIANCE_FLOOR {
                    hard_pt[p] = true;
                } else {
                    inv_s[p] = 1.0 / libm::sqrt(v);
                }
            }
        }
        let nv = self.z.len();
        let mut best_values = vec![f64::NEG_INFINITY; nv];
        let mut best_index = vec![0; nv];
        if !f.informative {
            best_values.iter_mut().for_each(|v| *v = self.baseline);
            best_index.iter_mut().for_each(|i| *i = self.baseline_index);
        } else {
            for (zi, &z) in self.z.iter().enumerate() {
                for i in 0..self.n_x {
                    let r = self.r_of(i, |p| {
                        let m = self.mu_minus_c[p] + c[p] * k * z;
                        if hard_pt[p] {
                            hard(m)
                        } else {
                            m * inv_s[p]
                        }
                    });
                    if r > best_values[zi] {
                        best_values[zi] = r;
                        best_index[zi] = i;
                    }
                }
            }
        }
        let value = if best_values.iter().any(|v| *v == f64::INFINITY) {
            f64::INFINITY
        } else {
            best_values.iter().sum::<f64>() / nv as f64 - self.baseline
        };
        DiscreteEval { value, best_values, best_index }
    }

    /// `α̂_n(y)` and, when `grad` is given, its gradient in `y` (original
    /// units) through the per-fantasy maximizers.
    pub fn value_grad(&self, y: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let Some(grad) = grad else {
            return self.evaluate(y).value;
        };
        let (n, d) = (self.gp.n(), self.gp.dim());
        let f = Fantasy::new(self.gp, y, true);
        let e = self.evaluate_with(&f);
        grad[..d].iter_mut().for_each(|g| *g = 0.0);
        if !f.informative || !e.value.is_finite() {
            return e.value;
        }
        let mut dky = vec![0.0; d];
        let mut g = vec![0.0; d + n + 1];
        let mut total = vec![0.0; d];
        for (zi, &z) in self.z.iter().enumerate() {
            let base = e.best_index[zi] * self.n_u;
            let mut acc = LogSumExp::new(d + n + 1);
            for p in base..base + self.n_u {
                g.iter_mut().for_each(|v| *v = 0.0);
                acc.add(self.log_dead[p], Some(&g));
                if !self.live[p] {
                    continue;
                }
                let kpy = self.gp.kern.eval_grad(&f.yn, self.pn.row(p), &mut dky);
                let c = kpy - dot(self.v.row(p), &f.w);
                let (t, a, b) = fantasy_t(self.mu_minus_c[p], self.var_raw[p], c, z, &f);
                let (lj, ct, _) = log_j(0.0, t);
                let ca = ct * a;
                for j in 0..d {
                    g[j] = ca * dky[j];
                }
                let vp = self.v.row(p);
                for r in 0..n {
                    g[d + r] = ca * vp[r];
                }
                g[d + n] = ct * b;
                acc.add(self.log_live[p] + lj, Some(&g));
            }
            let (ls, acc_g) = acc.finish();
            let log_p = ls - self.ln_nu;
            let gy = y_gradient(self.gp, &f, &acc_g);
            let est = finish_estimate(log_p, gy, self.scale, true);
            for j in 0..d {
                total[j] += est.grad[j];
            }
        }
        for j in 0..d {
            grad[j] = total[j] / (self.z.len() as f64 * self.gp.bounds.width(j));
        }
        e.value
    }
}

#[inline]
fn hard(m: f64) -> f64 {
    if m >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }
}

/// Assembles `∇_y log P̂` (normalized) from the accumulated
/// `[direct (d) | Σ ct·A·v_p (n) | Σ ct·B]`.
fn y_gradient(gp: &Surrogate, f: &Fantasy, acc: &[f64]) -> Vec<f64> {
    let (n, d) = (gp.n(), gp.dim());
    let mut out = acc[..d].to_vec();
    let mut beta = acc[d..d + n].to_vec();
    gp.chol.solve_upper_in_place(&mut beta);
    for i in 0..n {
        let row = &f.dk[i * d..(i + 1) * d];
        for j in 0..d {
            out[j] -= beta[i] * row[j];
        }
    }
    let s = acc[d + n];
    for j in 0..d {
        out[j] += s * f.dvar[j];
    }
    out
}

/// The one-shot joint objective `(1/N_v) Σ_i R̂_{n+1}(x_i; y, z_i)` over
/// `θ = (y, x_1, …, x_{N_v})` in original units.
#[derive(Debug, Clone)]
pub struct OneShotKg<'a> {
    gp: &'a Surrogate,
    cs: f64,
    z: Vec<f64>,
    is: &'a IsSample,
    bounds: Bounds,
    delta: f64,
    scale: ValueScale,
}

impl<'a> OneShotKg<'a> {
    pub fn new(gp: &'a Surrogate, threshold: f64, z: &[f64], is: &'a IsSample, bounds: &Bounds, delta: f64, scale: ValueScale) -> Self {
        Self { gp, cs: gp.output.forward(threshold), z: z.to_vec(), is, bounds: bounds.clone(), delta, scale }
    }

    /// Length of `θ`.
    pub fn dim(&self) -> usize {
        self.gp.dim() * (1 + self.z.len())
    }

    /// Box for `θ`: the design box repeated `1 + N_v` times.
    pub fn joint_bounds(&self) -> Bounds {
        let m = 1 + self.z.len();
        let lower: Vec<f64> = (0..m).flat_map(|_| self.bounds.lower().iter().copied()).collect();
        let upper: Vec<f64> = (0..m).flat_map(|_| self.bounds.upper().iter().copied()).collect();
        Bounds::new(lower, upper).expect("repeated valid box")
    }

    /// `R̂_{n+1}(x_i; y, z_i)` for every fantasy.
    pub fn terms(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.gp.dim();
        let f = Fantasy::new(self.gp, &theta[..d], false);
        (0..self.z.len()).map(|i| self.term(&f, i, &theta[d * (1 + i)..d * (2 + i)], None)).collect()
    }

    /// Objective value, with the gradient written into `grad` when given.
    pub fn value_grad(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.gp.dim();
        let nv = self.z.len();
        let want = grad.is_some();
        let f = Fantasy::new(self.gp, &theta[..d], want);
        let mut sum = 0.0;
        let mut perfect = false;
        match grad {
            None => {
                for i in 0..nv {
                    let r = self.term(&f, i, &theta[d * (1 + i)..d * (2 + i)], None);
                    perfect |= r == f64::INFINITY;
                    sum += r;
                }
            }
            Some(g) => {
                g.iter_mut().for_each(|v| *v = 0.0);
                let mut gi = vec![0.0; 2 * d];
                for i in 0..nv {
                    let r = self.term(&f, i, &theta[d * (1 + i)..d * (2 + i)], Some(&mut gi));
                    perfect |= r == f64::INFINITY;
                    sum += r;
                    for j in 0..d {
                        g[j] += gi[j] / nv as f64;
                        g[d * (1 + i) + j] = gi[d + j] / nv as f64;
                    }
                }
                if perfect {
                    g.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        if perfect { f64::INFINITY } else { sum / nv as f64 }
    }

    /// One fantasy term. `grad` receives `[∂/∂y (d) | ∂/∂x_i (d)]` in
    /// original units.
    fn term(&self, f: &Fantasy, i: usize, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let gp = self.gp;
        let (n, d) = (gp.n(), gp.dim());
        let z = self.z[i];
        let want = grad.is_some();
        let width = 1 + usize::from(want) * (2 * d + n);
        let mut acc = LogSumExp::new(if want { width } else { 0 });
        let mut y = vec![0.0; d];
        let mut pn = vec![0.0; d];
        let mut g_iota = vec![0.0; d];
        let mut k = vec![0.0; n];
        let mut dk = if want { vec![0.0; n * d] } else { Vec::new() };
        let mut dkpy = vec![0.0; d];
        let mut beta = vec![0.0; n];
        let mut g = vec![0.0; if want { width } else { 0 }];
        for (u, &lw) in self.is.points.iter_rows().zip(&self.is.log_weights) {
            for j in 0..d {
                y[j] = x[j] + u[j];
            }
            let li = log_smooth_feasibility(&y, &self.bounds, self.delta, want.then_some(&mut g_iota[..]));
            if li == f64::NEG_INFINITY {
                if want {
                    g.iter_mut().for_each(|v| *v = 0.0);
                    acc.add(lw, Some(&g));
                } else {
                    acc.add(lw, None);
                }
                continue;
            }
            gp.bounds.to_unit(&y, &mut pn);
            for r in 0..n {
                k[r] = if want {
                    gp.kern.eval_grad(&pn, gp.x.row(r), &mut dk[r * d..(r + 1) * d])
                } else {
                    gp.kern.eval(&pn, gp.x.row(r))
                };
            }
            let mu = gp.hp.constant_mean + dot(&k, &gp.alpha);
            let mut vp = k.clone();
            gp.chol.solve_lower_in_place(&mut vp);
            let var_raw = gp.kern.s2 - dot(&vp, &vp);
            let (c, kpy_ok) = if f.informative {
                let kpy = if want { gp.kern.eval_grad(&pn, &f.yn, &mut dkpy) } else { gp.kern.eval(&pn, &f.yn) };
                (kpy - dot(&vp, &f.w), true)
            } else {
                (0.0, false)
            };
            let (t, a, b) = fantasy_t(mu - self.cs, var_raw, c, z, f);
            let (lj, ct, ci) = log_j(li, t);
            if !want {
                acc.add(lw + lj, None);
                continue;
            }
            g.iter_mut().for_each(|v| *v = 0.0);
            if t.is_finite() && ct != 0.0 {
                let v = var_raw - c * c / f.dd;
                let s = libm::sqrt(v);
                beta.copy_from_slice(&vp);
                gp.chol.solve_upper_in_place(&mut beta);
                // ∂t/∂p = ∂k_pᵀ(α/s + t·β_p/V' − A·γ) + A·∂k(p, y)/∂p.
                let mut dt = vec![0.0; d];
                for r in 0..n {
                    let q = gp.alpha[r] / s + t * beta[r] / v - if kpy_ok { a * f.gamma[r] } else { 0.0 };
                    let row = &dk[r * d..(r + 1) * d];
                    for j in 0..d {
                        dt[j] += q * row[j];
                    }
                }
                if kpy_ok {
                    for j in 0..d {
                        dt[j] += a * dkpy[j];
                    }
                }
                let ca = ct * a;
                for j in 0..d {
                    // ∂k(y, p)/∂y = −∂k(p, y)/∂p for a stationary kernel.
                    g[j] = -ca * dkpy[j];
                    g[d + j] = ct * dt[j] / gp.bounds.width(j);
                }
                for r in 0..n {
                    g[2 * d + r] = ca * vp[r];
                }
                g[2 * d + n] = ct * b;
            }
            for j in 0..d {
                g[d + j] += ci * g_iota[j];
            }
            acc.add(lw + lj, Some(&g));
        }
        let (ls, accg) = acc.finish();
        let log_p = ls - libm::log(self.is.len() as f64);
        let Some(out) = grad else {
            return value_of(log_p, self.scale);
        };
        // Reorder to [y-direct | v-sum | scalar] for the shared assembly.
        let mut yacc = Vec::with_capacity(d + n + 1);
        yacc.extend_from_slice(&accg[..d]);
        yacc.extend_from_slice(&accg[2 * d..]);
        let mut gy = if f.informative { y_gradient(gp, f, &yacc) } else { vec![0.0; d] };
        for j in 0..d {
            gy[j] /= gp.bounds.width(j);
        }
        let mut full = gy;
        full.extend_from_slice(&accg[d..2 * d]);
        let e = finish_estimate(log_p, full, self.scale, true);
        out[..2 * d].copy_from_slice(&e.grad);
        e.value
    }
}

/// Per-iteration random inputs shared by both KG variants.
struct Draws {
    x_disc: Matrix,
    z: Vec<f64>,
    is: IsSample,
}

fn draws(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Draws> {
    let n = ctx.n as u64;
    let p = ctx.problem;
    let x_disc = sobol_box(&p.bounds, spec.n_x, derive(ctx.seed, Purpose::XDisc, n))?;
    let z = standard_normals(derive(ctx.seed, Purpose::ZSample, n), spec.n_v, 1)?.into_vec();
    let is = draw_is_sample(&p.perturbation, spec.tau, spec.n_u, derive(ctx.seed, Purpose::IsSample, n))?;
    Ok(Draws { x_disc, z, is })
}

pub fn kg_discrete_next(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Proposal> {
    let gp = ctx.surrogate()?;
    let p = ctx.problem;
    let dr = draws(ctx, spec)?;
    let kg = DiscreteKg::new(gp, p.threshold, &dr.x_disc, &dr.is, &dr.z, &p.bounds, 0.0, spec.value_scale);
    let n = ctx.n as u64;
    let cands = sobol_box(&p.bounds, spec.n_raw_oneshot, derive(ctx.seed, Purpose::Restarts, n << 8 | SCAN_DISCRETE))?;
    let best = maximize_from_scan(
        |y, g| kg.value_grad(y, g),
        &p.bounds,
        &cands,
        &[],
        spec,
        derive(ctx.seed, Purpose::Restarts, n << 8 | PICK_DISCRETE),
    );
    Ok(Proposal::new(best.x, best.value, Rule::KgDiscrete))
}

/// Result of the one-shot optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OneShotResult {
    pub y: Vec<f64>,
    /// Inner maximizers `x_1, …, x_{N_v}`, one row per fantasy.
    pub xs: Matrix,
    /// Joint objective at the optimum.
    pub objective: f64,
    /// `max_x R̂_n(x)` found for reporting.
    pub baseline: f64,
    /// `objective − baseline`.
    pub value: f64,
}

/// Maximizes the one-shot objective from discrete-KG seeded restarts plus a
/// start with every `x_i` at the current best design.
pub fn optimize_oneshot(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<OneShotResult> {
    let gp = ctx.surrogate()?;
    let p = ctx.problem;
    let (d, nv) = (p.dim(), spec.n_v);
    let n = ctx.n as u64;
    let dr = draws(ctx, spec)?;
    let bounds = &p.bounds;
    let disc = DiscreteKg::new(gp, p.threshold, &dr.x_disc, &dr.is, &dr.z, bounds, spec.delta, spec.value_scale);
    let os = OneShotKg::new(gp, p.threshold, &dr.z, &dr.is, bounds, spec.delta, spec.value_scale);
    let jb = os.joint_bounds();

    let seed_theta = |y: &[f64], idx: &[usize]| -> Vec<f64> {
        let mut th = y.to_vec();
        for &i in idx {
            th.extend_from_slice(dr.x_disc.row(i));
        }
        th
    };

    let cands = sobol_box(bounds, spec.n_raw_oneshot, derive(ctx.seed, Purpose::Restarts, n << 8 | SCAN_ONESHOT))?;
    let evals: Vec<DiscreteEval> = cands.iter_rows().map(|y| disc.evaluate(y)).collect();
    let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
    let picks = boltzmann_restarts(&values, spec.n_restarts, spec.temperature, derive(ctx.seed, Purpose::Restarts, n << 8 | PICK_ONESHOT));
    let mut starts: Vec<Vec<f64>> = picks.iter().map(|&i| seed_theta(cands.row(i), &evals[i].best_index)).collect();

    // Every x_i at the current best design: by Jensen this start is already
    // at least the baseline up to estimator noise.
    let rn = |x: &[f64], g: &mut [f64]| {
        let e = estimate_pn(gp, x, &dr.is, bounds, spec.delta, p.threshold, spec.value_scale, true);
        for j in 0..d {
            g[j] = -e.grad[j];
        }
        -e.value
    };
    let polished = minimize(rn, dr.x_disc.row(disc.baseline_index()), bounds, &spec.qn);
    let xb = polished.x;
    let baseline = (-polished.value).max(disc.baseline());
    let best_raw = argmax(&values).unwrap_or(0);
    let mut incumbent = cands.row(best_raw).to_vec();
    for _ in 0..nv {
        incumbent.extend_from_slice(&xb);
    }
    starts.push(incumbent);

    let start_values: Vec<f64> = starts.iter().map(|th| os.value_grad(th, None)).collect();
    let mut best_theta = starts[0].clone();
    let mut best_value = start_values[0];
    for (th, &v) in starts.iter().zip(&start_values) {
        if v > best_value || best_value.is_nan() {
            best_value = v;
            best_theta = th.clone();
        }
    }
    if best_value != f64::INFINITY {
        if let Some(r) = multistart_maximize(|th, g| os.value_grad(th, Some(g)), &starts, &jb, &spec.qn) {
            if r.value > best_value {
                best_value = r.value;
                best_theta = r.x;
            }
        }
    }

    // Swap in any discretization point that beats the continuous x_i at the
    // final y, so the one-shot value dominates the discrete one.
    let y = best_theta[..d].to_vec();
    if best_value.is_finite() {
        let at_y = disc.evaluate(&y);
        let terms = os.terms(&best_theta);
        let mut changed = false;
        for i in 0..nv {
            if at_y.best_values[i] > terms[i] {
                best_theta[d * (1 + i)..d * (2 + i)].copy_from_slice(dr.x_disc.row(at_y.best_index[i]));
                changed = true;
            }
        }
        if changed {
            best_value = os.value_grad(&best_theta, None);
        }
    }
    let xs = Matrix::from_vec(nv, d, best_theta[d..].to_vec());
    let value = if best_value == f64::INFINITY { f64::INFINITY } else { best_value - baseline };
    Ok(OneShotResult { y, xs, objective: best_value, baseline, value })
}

pub fn kg_oneshot_next(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Proposal> {
    let r = optimize_oneshot(ctx, spec)?;
    Ok(Proposal::new(r.y, r.value, Rule::KgOneShot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{problem, Mode};
    use crate::surrogate::GpHyperparams;

    fn setup(mode: Mode) -> (crate::problems::Problem, Surrogate, Matrix, Vec<f64>) {
        let p = problem("branin-2d", mode).unwrap();
        let pts = [[-3.0, 2.0], [0.0, 10.0], [4.0, 5.0], [8.0, 1.0], [2.5, 13.0], [9.0, 12.0], [-1.0, 6.0], [6.0, 8.5]];
        let x = Matrix::from_rows(&pts);
        let v: Vec<f64> = pts.iter().map(|r| p.evaluate(r).unwrap()).collect();
        let hp = GpHyperparams::new(1.5, vec![0.35, 0.4], 0.1);
        let gp = Surrogate::condition(p.bounds.clone(), &x, &v, hp).unwrap();
        (p, gp, x, v)
    }

    fn small_is(p: &crate::problems::Problem, n: usize, seed: u64) -> IsSample {
        draw_is_sample(&p.perturbation, p.mode.default_tau(), n, seed).unwrap()
    }

    #[test]
    fn rank_one_update_matches_refactorized_fantasy() {
        for mode in [Mode::Extreme, Mode::NonExtreme] {
            let (p, gp, _, _) = setup(mode);
            let scale = if mode == Mode::Extreme { ValueScale::Log } else { ValueScale::Linear };
            let is = small_is(&p, 32, 3);
            let xd = sobol_box(&p.bounds, 6, 11).unwrap();
            let z = [-1.3, 0.4, 2.1];
            for delta in [0.0, 0.75] {
                let kg = DiscreteKg::new(&gp, p.threshold, &xd, &is, &z, &p.bounds, delta, scale);
                let y = [3.0, 4.0];
                let e = kg.evaluate(&y);
                for (zi, &zz) in z.iter().enumerate() {
                    let fg = gp.fantasize(&y, zz).unwrap();
                    let want = xd
                        .iter_rows()
                        .map(|x| estimate_pn(&fg, x, &is, &p.bounds, delta, p.threshold, scale, false).value)
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert!((e.best_values[zi] - want).abs() < 1e-8 * (1.0 + want.abs()), "{mode:?} {delta} {zi}: {} vs {want}", e.best_values[zi]);
                }
                let base = xd
                    .iter_rows()
                    .map(|x| estimate_pn(&gp, x, &is, &p.bounds, delta, p.threshold, scale, false).value)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((kg.baseline() - base).abs() < 1e-10 * (1.0 + base.abs()));

                let os = OneShotKg::new(&gp, p.threshold, &z, &is, &p.bounds, delta, scale);
                let mut th = y.to_vec();
                for i in 0..3 {
                    th.extend_from_slice(xd.row(i + 1));
                }
                let terms = os.terms(&th);
                for i in 0..3 {
                    let fg = gp.fantasize(&y, z[i]).unwrap();
                    let want = estimate_pn(&fg, xd.row(i + 1), &is, &p.bounds, delta, p.threshold, scale, false).value;
                    assert!((terms[i] - want).abs() < 1e-8 * (1.0 + want.abs()), "{terms:?} {want}");
                }
            }
        }
    }

    fn fd_check(f: &dyn Fn(&[f64], Option<&mut [f64]>) -> f64, x: &[f64], h: f64, tol: f64) {
        let mut g = vec![0.0; x.len()];
        let v = f(x, Some(&mut g));
        assert!(v.is_finite());
        for j in 0..x.len() {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[j] += h;
            b[j] -= h;
            let fd = (f(&a, None) - f(&b, None)) / (2.0 * h);
            let scale = fd.abs().max(g[j].abs()).max(1e-6);
            assert!((fd - g[j]).abs() <= tol * scale, "coordinate {j}: fd {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn oneshot_gradient_matches_differences() {
        for mode in [Mode::Extreme, Mode::NonExtreme] {
            let (p, gp, _, _) = setup(mode);
            let scale = if mode == Mode::Extreme { ValueScale::Log } else { ValueScale::Linear };
            let is = small_is(&p, 16, 5);
            let z = [-0.7, 1.2];
            let os = OneShotKg::new(&gp, p.threshold, &z, &is, &p.bounds, 0.75, scale);
            let th = [2.2, 7.1, 1.0, 3.0, 5.5, 9.0];
            fd_check(&|t, g| os.value_grad(t, g), &th, 1e-5, 1e-3);
        }
    }

    #[test]
    fn discrete_gradient_matches_differences() {
        let (p, gp, _, _) = setup(Mode::Extreme);
        let is = small_is(&p, 16, 5);
        let xd = sobol_box(&p.bounds, 8, 2).unwrap();
        let z = [-0.7, 0.3, 1.2];
        let kg = DiscreteKg::new(&gp, p.threshold, &xd, &is, &z, &p.bounds, 0.0, ValueScale::Log);
        fd_check(&|y, g| kg.value_grad(y, g), &[2.2, 7.1], 1e-6, 1e-3);
    }

    #[test]
    fn training_point_carries_no_information() {
        let (p, gp, x, _) = setup(Mode::Extreme);
        let is = small_is(&p, 32, 3);
        let xd = sobol_box(&p.bounds, 32, 1).unwrap();
        let z = standard_normals(4, 16, 1).unwrap().into_vec();
        let kg = DiscreteKg::new(&gp, p.threshold, &xd, &is, &z, &p.bounds, 0.0, ValueScale::Log);
        for r in x.iter_rows() {
            let v = kg.evaluate(r).value;
            assert!(v.abs() <= 1e-3, "{r:?}: {v}");
        }
    }

    #[test]
    fn discrete_value_is_nonnegative() {
        let (p, gp, _, _) = setup(Mode::Extreme);
        let is = small_is(&p, 64, 3);
        let xd = sobol_box(&p.bounds, 64, 1).unwrap();
        let z = standard_normals(4, 64, 1).unwrap().into_vec();
        let kg = DiscreteKg::new(&gp, p.threshold, &xd, &is, &z, &p.bounds, 0.0, ValueScale::Log);
        let ys = sobol_box(&p.bounds, 100, 9).unwrap();
        for y in ys.iter_rows() {
            let v = kg.evaluate(y).value;
            assert!(v >= -1e-2, "{y:?}: {v}");
        }
    }
}
