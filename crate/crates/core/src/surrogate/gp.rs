//! Exact GP inference with input normalization and output standardization.

use alloc::vec;
use alloc::vec::Vec;

use super::kernel::{GpHyperparams, Matern52};
use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

/// Posterior variances below this (standardized units) are clamped to it.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Smallest output standard deviation used for standardization.
pub const STD_FLOOR: f64 = 1e-8;

/// Affine output standardization `(v - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputTransform {
    pub mean: f64,
    pub std: f64,
}

impl OutputTransform {
    pub const IDENTITY: Self = Self { mean: 0.0, std: 1.0 };

    /// Sample mean and unbiased standard deviation; a single observation
    /// uses unit scale.
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::IDENTITY;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            1.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            libm::sqrt(ss / (n - 1) as f64).max(STD_FLOOR)
        };
        Self { mean, std }
    }

    #[inline]
    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    #[inline]
    pub fn inverse(&self, s: f64) -> f64 {
        self.mean + self.std * s
    }
}

/// Posterior mean and variance with gradients, in original units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub var: f64,
    pub dmean: Vec<f64>,
    pub dvar: Vec<f64>,
}

/// Scratch buffers for allocation-free posterior evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub(crate) xn: Vec<f64>,
    pub(crate) k: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) dk: Vec<f64>,
    pub(crate) g: Vec<f64>,
    pub(crate) h: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize, d: usize) -> Self {
        Self { xn: vec![0.0; d], k: vec![0.0; n], v: vec![0.0; n], dk: vec![0.0; n * d], g: vec![0.0; d], h: vec![0.0; d] }
    }

    pub(crate) fn ensure(&mut self, n: usize, d: usize) {
        if self.k.len() != n || self.xn.len() != d {
            *self = Self::new(n, d);
        }
    }
}

/// A conditioned GP: training data, hyperparameters, transforms and factor.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub(crate) bounds: Bounds,
    pub(crate) output: OutputTransform,
    pub(crate) hp: GpHyperparams,
    pub(crate) kern: Matern52,
    /// Normalized training inputs.
    pub(crate) x: Matrix,
    /// Standardized training targets.
    pub(crate) y: Vec<f64>,
    pub(crate) raw_x: Matrix,
    pub(crate) raw_y: Vec<f64>,
    pub(crate) chol: Cholesky,
    /// `(K + σ²I)^{-1}(y - m)`.
    pub(crate) alpha: Vec<f64>,
}

impl Surrogate {
    /// The unconditioned prior on the given box.
    pub fn prior(bounds: Bounds, hp: GpHyperparams, output: OutputTransform) -> Self {
        let d = bounds.dim();
        let chol = Cholesky::factor(&Matrix::zeros(0, 0)).expect("empty factor");
        Self {
            kern: Matern52::new(&hp),
            bounds,
            output,
            hp,
            x: Matrix::zeros(0, d),
            y: Vec::new(),
            raw_x: Matrix::zeros(0, d),
            raw_y: Vec::new(),
            chol,
            alpha: Vec::new(),
        }
    }

    /// Conditions on data with fixed hyperparameters; output transform is
    /// fitted to `targets`.
    pub fn condition(bounds: Bounds, inputs: &Matrix, targets: &[f64], hp: GpHyperparams) -> Result<Self> {
        let output = OutputTransform::fit(targets);
        Self::condition_with(bounds, inputs, targets, hp, output)
    }

    pub fn condition_with(
        bounds: Bounds,
        inputs: &Matrix,
        targets: &[f64],
        hp: GpHyperparams,
        output: OutputTransform,
    ) -> Result<Self> {
        let d = bounds.dim();
        if inputs.rows() != targets.len() || (inputs.rows() > 0 && inputs.cols() != d) {
            return Err(Error::Config("training inputs and targets disagree in shape".into()));
        }
        if hp.dim() != d || !hp.is_valid() {
            return Err(Error::Config("invalid GP hyperparameters".into()));
        }
        let n = targets.len();
        let mut x = Matrix::zeros(n, d);
        for i in 0..n {
            bounds.to_unit(inputs.row(i), x.row_mut(i));
        }
        let y: Vec<f64> = targets.iter().map(|v| output.forward(*v)).collect();
        let kern = Matern52::new(&hp);
        let chol = Cholesky::factor(&gram(&kern, &x, hp.noise_variance))?;
        let resid: Vec<f64> = y.iter().map(|v| v - hp.constant_mean).collect();
        let alpha = chol.solve(&resid);
        Ok(Self {
            bounds,
            output,
            hp,
            kern,
            x,
            y,
            raw_x: inputs.clone(),
            raw_y: targets.to_vec(),
            chol,
            alpha,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output
    }

    pub fn train_inputs(&self) -> &Matrix {
        &self.raw_x
    }

    pub fn train_targets(&self) -> &[f64] {
        &self.raw_y
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.n(), self.dim())
    }

    /// Standardized posterior at a normalized point.
    #[inline]
    pub(crate) fn predict_normalized(&self, xn: &[f64], k: &mut [f64], v: &mut [f64]) -> (f64, f64) {
        let n = self.n();
        for i in 0..n {
            k[i] = self.kern.eval(xn, self.x.row(i));
        }
        let mu = self.hp.constant_mean + dot(&k[..n], &self.alpha);
        v[..n].copy_from_slice(&k[..n]);
        self.chol.solve_lower_in_place(&mut v[..n]);
        let var = (self.kern.s2 - dot(&v[..n], &v[..n])).max(VARIANCE_FLOOR);
        (mu, var)
    }

    /// Posterior mean and variance of `f(y)` in original units.
    pub fn predict(&self, y: &[f64], ws: &mut Workspace) -> (f64, f64) {
        ws.ensure(self.n(), self.dim());
        self.bounds.to_unit(y, &mut ws.xn);
        let xn = core::mem::take(&mut ws.xn);
        let (mu, var) = self.predict_normalized(&xn, &mut ws.k, &mut ws.v);
        ws.xn = xn;
        let s = self.output.std;
        (self.output.inverse(mu), var * s * s)
    }

    /// Standardized posterior and its gradient at a normalized point.
    ///
    /// Writes `∂μ/∂x` and `∂var/∂x` (normalized coordinates) into `dmu` and
    /// `dvar`; returns `(μ, var, floored)`.
    pub(crate) fn predict_normalized_grad(
        &self,
        xn: &[f64],
        ws: &mut Workspace,
        dmu: &mut [f64],
        dvar: &mut [f64],
    ) -> (f64, f64, bool) {
        let (n, d) = (self.n(), self.dim());
        for i in 0..n {
            ws.k[i] = self.kern.eval_grad(xn, self.x.row(i), &mut ws.dk[i * d..(i + 1) * d]);
        }
        let mu = self.hp.constant_mean + dot(&ws.k[..n], &self.alpha);
        ws.v[..n].copy_from_slice(&ws.k[..n]);
        self.chol.solve_lower_in_place(&mut ws.v[..n]);
        let raw_var = self.kern.s2 - dot(&ws.v[..n], &ws.v[..n]);
        let floored = raw_var <= VARIANCE_FLOOR;
        let var = raw_var.max(VARIANCE_FLOOR);
        // β = L^{-T} v = K^{-1} k.
        self.chol.solve_upper_in_place(&mut ws.v[..n]);
        dmu[..d].iter_mut().for_each(|v| *v = 0.0);
        dvar[..d].iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let (a, b) = (self.alpha[i], ws.v[i]);
            let row = &ws.dk[i * d..(i + 1) * d];
            for j in 0..d {
                dmu[j] += a * row[j];
                dvar[j] += b * row[j];
            }
        }
        for j in 0..d {
            dvar[j] = if floored { 0.0 } else { -2.0 * dvar[j] };
        }
        (mu, var, floored)
    }

    /// Posterior mean/variance and their gradients in original units.
    ///
    /// The variance gradient is zero where the floor is active.
    pub fn predict_grad(&self, y: &[f64], ws: &mut Workspace, out: &mut Prediction) {
        let d = self.dim();
        ws.ensure(self.n(), d);
        out.dmean.resize(d, 0.0);
        out.dvar.resize(d, 0.0);
        self.bounds.to_unit(y, &mut ws.xn);
        let xn = core::mem::take(&mut ws.xn);
        let (mu, var, _) = self.predict_normalized_grad(&xn, ws, &mut out.dmean, &mut out.dvar);
        ws.xn = xn;
        let s = self.output.std;
        for j in 0..d {
            let w = self.bounds.width(j);
            out.dmean[j] *= s / w;
            out.dvar[j] *= s * s / w;
        }
        out.mean = self.output.inverse(mu);
        out.var = var * s * s;
    }

    /// Joint posterior over `points` in original units.
    pub fn posterior(&self, points: &Matrix) -> (Vec<f64>, Matrix) {
        let (n, d, m) = (self.n(), self.dim(), points.rows());
        let mut xn = Matrix::zeros(m, d);
        for p in 0..m {
            self.bounds.to_unit(points.row(p), xn.row_mut(p));
        }
        let mut v = Matrix::zeros(m, n);
        let mut mean = vec![0.0; m];
        for p in 0..m {
            let row = v.row_mut(p);
            for i in 0..n {
                row[i] = self.kern.eval(xn.row(p), self.x.row(i));
            }
            mean[p] = self.output.inverse(self.hp.constant_mean + dot(row, &self.alpha));
            self.chol.solve_lower_in_place(row);
        }
        let s2 = self.output.std * self.output.std;
        let mut cov = Matrix::zeros(m, m);
        for p in 0..m {
            for q in 0..=p {
                let mut c = self.kern.eval(xn.row(p), xn.row(q)) - dot(v.row(p), v.row(q));
                if p == q {
                    c = c.max(VARIANCE_FLOOR);
                }
                cov.set(p, q, c * s2);
                cov.set(q, p, c * s2);
            }
        }
        (mean, cov)
    }

    /// Conditions on the fantasy observation `μ_n(y) + z·√k_n(y, y)` by
    /// extending the Cholesky factor. Hyperparameters and transforms are kept.
    ///
    /// When the posterior variance at `y` is at the floor the observation
    /// carries no information and a copy of `self` is returned.
    pub fn fantasize(&self, y: &[f64], z: f64) -> Result<Self> {
        let (n, d) = (self.n(), self.dim());
        let mut xn = vec![0.0; d];
        self.bounds.to_unit(y, &mut xn);
        let mut k = vec![0.0; n];
        let mut v = vec![0.0; n];
        let (mu, var) = self.predict_normalized(&xn, &mut k, &mut v);
        if var <= VARIANCE_FLOOR {
            return Ok(self.clone());
        }
        let value = mu + z * libm::sqrt(var);
        let chol = self
            .chol
            .extend(&k, self.kern.s2 + self.hp.noise_variance)
            .ok_or(Error::NotPositiveDefinite { jitter: self.chol.jitter() })?;
        let mut x = self.x.clone();
        x.push_row(&xn);
        let mut ys = self.y.clone();
        ys.push(value);
        let resid: Vec<f64> = ys.iter().map(|v| v - self.hp.constant_mean).collect();
        let alpha = chol.solve(&resid);
        let mut raw_x = self.raw_x.clone();
        raw_x.push_row(y);
        let mut raw_y = self.raw_y.clone();
        raw_y.push(self.output.inverse(value));
        Ok(Self {
            bounds: self.bounds.clone(),
            output: self.output,
            hp: self.hp.clone(),
            kern: self.kern.clone(),
            x,
            y: ys,
            raw_x,
            raw_y,
            chol,
            alpha,
        })
    }
}

/// `K(X, X) + noise·I` for normalized inputs.
pub(crate) fn gram(kern: &Matern52, x: &Matrix, noise: f64) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = kern.eval(x.row(i), x.row(j));
            k.set(i, j, v);
            k.set(j, i, v);
        }
        k.set(i, i, kern.s2 + noise);
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Surrogate {
        let bounds = Bounds::new(vec![-1.0, 0.0], vec![1.0, 4.0]).unwrap();
        let pts = [[-0.8, 0.5], [0.1, 3.0], [0.6, 1.2], [-0.2, 2.2], [0.9, 3.8]];
        let x = Matrix::from_rows(&pts);
        let y: Vec<f64> = pts.iter().map(|p| libm::sin(3.0 * p[0]) + 0.3 * p[1]).collect();
        Surrogate::condition(bounds, &x, &y, GpHyperparams::new(1.3, vec![0.4, 0.6], 0.1)).unwrap()
    }

    #[test]
    fn interpolates_training_data() {
        let gp = toy();
        let mut ws = gp.workspace();
        for i in 0..gp.n() {
            let (m, var) = gp.predict(gp.train_inputs().row(i), &mut ws);
            assert!((m - gp.train_targets()[i]).abs() < 2e-2 * gp.output.std);
            assert!(var < 1e-3 * gp.output.std * gp.output.std);
        }
    }

    #[test]
    fn prior_reduction() {
        let hp = GpHyperparams::new(2.0, vec![0.3], 0.7);
        let gp = Surrogate::prior(Bounds::unit(1), hp, OutputTransform::IDENTITY);
        let (m, v) = gp.predict(&[0.4], &mut gp.workspace());
        assert_eq!((m, v), (0.7, 2.0));
    }

    #[test]
    fn midpoint_variance_reduced() {
        let x = Matrix::from_rows(&[[0.2], [0.8]]);
        let hp = GpHyperparams::new(1.0, vec![0.3], 0.0);
        let gp = Surrogate::condition_with(Bounds::unit(1), &x, &[1.0, -1.0], hp, OutputTransform::IDENTITY).unwrap();
        let (_, v) = gp.predict(&[0.5], &mut gp.workspace());
        assert!(v < 1.0);
    }

    #[test]
    fn gradients_match_differences() {
        let gp = toy();
        let mut ws = gp.workspace();
        let mut pred = Prediction { mean: 0.0, var: 0.0, dmean: vec![], dvar: vec![] };
        let y = [0.33, 1.7];
        gp.predict_grad(&y, &mut ws, &mut pred);
        let (m0, v0) = gp.predict(&y, &mut ws);
        assert!((pred.mean - m0).abs() < 1e-14 && (pred.var - v0).abs() < 1e-14);
        for j in 0..2 {
            let h = 1e-6 * gp.bounds.width(j);
            let (mut yp, mut ym) = (y, y);
            yp[j] += h;
            ym[j] -= h;
            let (mp, vp) = gp.predict(&yp, &mut ws);
            let (mm, vm) = gp.predict(&ym, &mut ws);
            assert!(((mp - mm) / (2.0 * h) - pred.dmean[j]).abs() < 1e-6 * (1.0 + pred.dmean[j].abs()));
            assert!(((vp - vm) / (2.0 * h) - pred.dvar[j]).abs() < 1e-6 * (1.0 + pred.dvar[j].abs()));
        }
    }

    #[test]
    fn joint_posterior_consistent() {
        let gp = toy();
        let pts = Matrix::from_rows(&[[0.0, 1.0], [0.5, 2.0], [-0.5, 3.5]]);
        let (mean, cov) = gp.posterior(&pts);
        let mut ws = gp.workspace();
        for p in 0..3 {
            let (m, v) = gp.predict(pts.row(p), &mut ws);
            assert!((m - mean[p]).abs() < 1e-12);
            assert!((v - cov.get(p, p)).abs() < 1e-12);
            for q in 0..3 {
                assert_eq!(cov.get(p, q), cov.get(q, p));
            }
        }
    }

    #[test]
    fn fantasy_matches_refit() {
        let gp = toy();
        let y = [0.25, 0.9];
        let z = -1.3;
        let fant = gp.fantasize(&y, z).unwrap();
        let mut x = gp.train_inputs().clone();
        x.push_row(&y);
        let mut t = gp.train_targets().to_vec();
        t.push(*fant.train_targets().last().unwrap());
        let refit = Surrogate::condition_with(gp.bounds.clone(), &x, &t, gp.hp.clone(), gp.output).unwrap();
        let (mut w1, mut w2) = (fant.workspace(), refit.workspace());
        for q in [[0.0, 0.0], [0.25, 0.9], [-0.7, 3.3], [0.95, 2.0]] {
            let (a, va) = fant.predict(&q, &mut w1);
            let (b, vb) = refit.predict(&q, &mut w2);
            assert!((a - b).abs() < 1e-10 && (va - vb).abs() < 1e-10);
        }
        let (m, _) = gp.predict(&y, &mut gp.workspace());
        let f0 = gp.fantasize(&y, 0.0).unwrap();
        let (m0, v0) = f0.predict(&y, &mut f0.workspace());
        assert!((m0 - m).abs() < 1e-8);
        let s2 = gp.output.std * gp.output.std;
        assert!(v0 <= gp.hp.noise_variance * s2 * (1.0 + 1e-6));
    }
}
