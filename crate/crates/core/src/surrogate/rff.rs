//! Posterior sample paths: random-Fourier-feature prior plus pathwise update.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::gp::{OutputTransform, Surrogate};
use super::kernel::Matern52;
use crate::domain::Bounds;
use crate::linalg::{dot, Matrix};
use crate::numerics::seed::rng;

/// Feature count used for Thompson sampling and GP test problems.
pub const DEFAULT_FEATURES: usize = 1024;

/// A deterministic function approximating one draw from the GP posterior.
#[derive(Debug, Clone)]
pub struct RffPath {
    bounds: Bounds,
    output: OutputTransform,
    /// Frequencies in normalized-input units, `n_features × d`.
    frequencies: Matrix,
    phases: Vec<f64>,
    weights: Vec<f64>,
    amplitude: f64,
    mean: f64,
    kern: Matern52,
    train_x: Matrix,
    /// `(K + σ²I)^{-1}(y − m − f_prior(X) − ε)`.
    update: Vec<f64>,
}

impl RffPath {
    pub fn n_features(&self) -> usize {
        self.phases.len()
    }

    pub fn frequencies(&self) -> &Matrix {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn prior_normalized(&self, xn: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.phases.len() {
            s += self.weights[k] * libm::cos(dot(self.frequencies.row(k), xn) + self.phases[k]);
        }
        self.amplitude * s
    }

    /// Path value in original output units at `y` (original input units).
    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut xn = vec![0.0; y.len()];
        self.bounds.to_unit(y, &mut xn);
        let mut f = self.mean + self.prior_normalized(&xn);
        for i in 0..self.update.len() {
            f += self.update[i] * self.kern.eval(&xn, self.train_x.row(i));
        }
        self.output.inverse(f)
    }

    /// Path value and gradient with respect to `y`.
    pub fn eval_grad(&self, y: &[f64], grad: &mut [f64]) -> f64 {
        let d = y.len();
        let mut xn = vec![0.0; d];
        self.bounds.to_unit(y, &mut xn);
        let mut g = vec![0.0; d];
        let mut f = self.mean;
        for k in 0..self.phases.len() {
            let w = self.frequencies.row(k);
            let (s, c) = libm::sincos(dot(w, &xn) + self.phases[k]);
            f += self.amplitude * self.weights[k] * c;
            let a = -self.amplitude * self.weights[k] * s;
            for j in 0..d {
                g[j] += a * w[j];
            }
        }
        let mut dk = vec![0.0; d];
        for i in 0..self.update.len() {
            f += self.update[i] * self.kern.eval_grad(&xn, self.train_x.row(i), &mut dk);
            for j in 0..d {
                g[j] += self.update[i] * dk[j];
            }
        }
        for j in 0..d {
            grad[j] = self.output.std * g[j] / self.bounds.width(j);
        }
        self.output.inverse(f)
    }
}

/// Draws Matérn-5/2 spectral frequencies: Gaussian over √(χ²₅/5), scaled by
/// the inverse lengthscales (a multivariate t with 5 degrees of freedom).
pub(crate) fn matern_frequencies<R: Rng>(r: &mut R, n_features: usize, lengthscales: &[f64]) -> Matrix {
    let d = lengthscales.len();
    let chi2 = Gamma::new(2.5, 2.0).expect("valid gamma");
    let mut m = Matrix::zeros(n_features, d);
    for k in 0..n_features {
        let w: f64 = chi2.sample(r);
        let scale = libm::sqrt(5.0 / w);
        let row = m.row_mut(k);
        for j in 0..d {
            let z: f64 = StandardNormal.sample(r);
            row[j] = z * scale / lengthscales[j];
        }
    }
    m
}

/// Samples a posterior path of `state` with `n_features` random features.
pub fn draw_rff_path(state: &Surrogate, n_features: usize, seed: u64) -> RffPath {
    let mut r = rng(seed);
    let hp = &state.hp;
    let frequencies = matern_frequencies(&mut r, n_features, &hp.lengthscales);
    let phases: Vec<f64> = (0..n_features).map(|_| r.random::<f64>() * 2.0 * core::f64::consts::PI).collect();
    let weights: Vec<f64> = (0..n_features).map(|_| StandardNormal.sample(&mut r)).collect();
    let amplitude = libm::sqrt(2.0 * hp.output_scale_sq / n_features as f64);
    let mut path = RffPath {
        bounds: state.bounds.clone(),
        output: state.output,
        frequencies,
        phases,
        weights,
        amplitude,
        mean: hp.constant_mean,
        kern: state.kern.clone(),
        train_x: state.x.clone(),
        update: Vec::new(),
    };
    let n = state.n();
    let noise_sd = libm::sqrt(hp.noise_variance);
    let resid: Vec<f64> = (0..n)
        .map(|i| {
            let eps: f64 = StandardNormal.sample(&mut r);
            state.y[i] - hp.constant_mean - path.prior_normalized(state.x.row(i)) - noise_sd * eps
        })
        .collect();
    path.update = state.chol.solve(&resid);
    path
}

/// A zero-mean GP prior path on `bounds` (used to build test problems).
pub fn prior_path(bounds: Bounds, output_scale_sq: f64, lengthscales: &[f64], n_features: usize, seed: u64) -> RffPath {
    let mut r = rng(seed);
    let frequencies = matern_frequencies(&mut r, n_features, lengthscales);
    let phases: Vec<f64> = (0..n_features).map(|_| r.random::<f64>() * 2.0 * core::f64::consts::PI).collect();
    let weights: Vec<f64> = (0..n_features).map(|_| StandardNormal.sample(&mut r)).collect();
    let hp = super::kernel::GpHyperparams::new(output_scale_sq, lengthscales.to_vec(), 0.0);
    RffPath {
        bounds,
        output: OutputTransform::IDENTITY,
        frequencies,
        phases,
        weights,
        amplitude: libm::sqrt(2.0 * output_scale_sq / n_features as f64),
        mean: 0.0,
        kern: Matern52::new(&hp),
        train_x: Matrix::zeros(0, lengthscales.len()),
        update: Vec::new(),
    }
}
