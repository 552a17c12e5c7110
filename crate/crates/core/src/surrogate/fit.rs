//! MAP estimation of GP hyperparameters.
//!
//! Priors (shape/rate): `s² ~ Gamma(2, 0.15)`, `ℓ_j ~ Gamma(3, 10)`; the
//! constant mean is flat and the noise variance fixed. The posterior density
//! is maximized over `(log s², log ℓ, mean)` with multistart quasi-Newton.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Gamma};

use super::gp::{gram, OutputTransform, Surrogate};
use super::kernel::{GpHyperparams, Matern52, NOISE_VARIANCE};
use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::numerics::seed::rng;
use crate::optimizers::{multistart_minimize, QnOptions};

pub const SCALE_PRIOR: (f64, f64) = (2.0, 0.15);
pub const LENGTHSCALE_PRIOR: (f64, f64) = (3.0, 10.0);
const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Fitting controls.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub prior_restarts: usize,
    pub qn: QnOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { prior_restarts: 5, qn: QnOptions::default() }
    }
}

fn param_bounds(d: usize) -> Bounds {
    let mut lo = vec![libm::log(1e-4)];
    let mut hi = vec![libm::log(1e3)];
    lo.extend(core::iter::repeat_n(libm::log(1e-3), d));
    hi.extend(core::iter::repeat_n(libm::log(1e2), d));
    lo.push(-10.0);
    hi.push(10.0);
    Bounds::new(lo, hi).expect("static parameter bounds")
}

fn unpack(theta: &[f64]) -> GpHyperparams {
    let d = theta.len() - 2;
    GpHyperparams::new(
        libm::exp(theta[0]),
        theta[1..=d].iter().map(|v| libm::exp(*v)).collect(),
        theta[d + 1],
    )
}

fn pack(hp: &GpHyperparams) -> Vec<f64> {
    let mut t = vec![libm::log(hp.output_scale_sq)];
    t.extend(hp.lengthscales.iter().map(|l| libm::log(*l)));
    t.push(hp.constant_mean);
    t
}

/// Log prior density (up to a constant) on the natural-scale parameters.
pub fn log_prior(hp: &GpHyperparams) -> f64 {
    let (a, b) = SCALE_PRIOR;
    let (c, e) = LENGTHSCALE_PRIOR;
    let mut lp = (a - 1.0) * libm::log(hp.output_scale_sq) - b * hp.output_scale_sq;
    for l in &hp.lengthscales {
        lp += (c - 1.0) * libm::log(*l) - e * l;
    }
    lp
}

/// Log marginal likelihood of standardized targets at normalized inputs.
pub fn log_marginal_likelihood(x: &Matrix, y: &[f64], hp: &GpHyperparams) -> Result<f64> {
    let kern = Matern52::new(hp);
    let chol = Cholesky::factor(&gram(&kern, x, hp.noise_variance))?;
    let r: Vec<f64> = y.iter().map(|v| v - hp.constant_mean).collect();
    let w = chol.solve_lower(&r);
    Ok(-0.5 * w.iter().map(|v| v * v).sum::<f64>() - 0.5 * chol.log_det() - 0.5 * y.len() as f64 * LN_2PI)
}

/// Negative log posterior and its gradient in `(log s², log ℓ, mean)`.
fn objective(theta: &[f64], x: &Matrix, y: &[f64], grad: &mut [f64]) -> f64 {
    let hp = unpack(theta);
    let (n, d) = (y.len(), hp.dim());
    let kern = Matern52::new(&hp);
    let kmat = gram(&kern, x, hp.noise_variance);
    let Ok(chol) = Cholesky::factor(&kmat) else {
        grad.iter_mut().for_each(|g| *g = 0.0);
        return f64::INFINITY;
    };
    let r: Vec<f64> = y.iter().map(|v| v - hp.constant_mean).collect();
    let alpha = chol.solve(&r);
    let lml = -0.5 * crate::linalg::dot(&r, &alpha) - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;
    let kinv = chol.inverse();
    grad.iter_mut().for_each(|g| *g = 0.0);
    // d LML / dθ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ); both matrices are symmetric.
    for i in 0..n {
        for k in 0..=i {
            let w = alpha[i] * alpha[k] - kinv.get(i, k);
            let mult = if i == k { 0.5 } else { 1.0 };
            let (xi, xk) = (x.row(i), x.row(k));
            let rr = libm::sqrt(kern.r2(xi, xk));
            let sr = SQRT5 * rr;
            let e = libm::exp(-sr);
            let kf = hp.output_scale_sq * (1.0 + sr + sr * sr / 3.0) * e;
            grad[0] += mult * w * kf;
            if i != k {
                let c = hp.output_scale_sq * (5.0 / 3.0) * (1.0 + sr) * e;
                for j in 0..d {
                    let dj = xi[j] - xk[j];
                    grad[1 + j] += mult * w * c * dj * dj * kern.inv_ls2[j];
                }
            }
        }
    }
    grad[d + 1] = alpha.iter().sum::<f64>();
    // Prior terms (densities on s² and ℓ, differentiated in log space).
    grad[0] += (SCALE_PRIOR.0 - 1.0) - SCALE_PRIOR.1 * hp.output_scale_sq;
    for j in 0..d {
        grad[1 + j] += (LENGTHSCALE_PRIOR.0 - 1.0) - LENGTHSCALE_PRIOR.1 * hp.lengthscales[j];
    }
    grad.iter_mut().for_each(|g| *g = -*g);
    -(lml + log_prior(&hp))
}

/// Fits MAP hyperparameters and returns the conditioned surrogate.
///
/// Starts: the previous MAP point (`warm`), the prior modes and
/// `prior_restarts` draws from the priors.
pub fn fit_map(
    bounds: &Bounds,
    inputs: &Matrix,
    targets: &[f64],
    seed: u64,
    warm: Option<&GpHyperparams>,
    opts: &FitOptions,
) -> Result<Surrogate> {
    let d = bounds.dim();
    let n = targets.len();
    if n == 0 {
        return Err(Error::Config("cannot fit a GP without observations".into()));
    }
    for i in 0..n {
        bounds.check(inputs.row(i))?;
    }
    let output = OutputTransform::fit(targets);
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        bounds.to_unit(inputs.row(i), x.row_mut(i));
    }
    let y: Vec<f64> = targets.iter().map(|v| output.forward(*v)).collect();
    let pb = param_bounds(d);

    let mut starts = Vec::new();
    if let Some(w) = warm.filter(|w| w.dim() == d && w.is_valid()) {
        starts.push(pack(w));
    }
    let mode_s2 = (SCALE_PRIOR.0 - 1.0) / SCALE_PRIOR.1;
    let mode_l = (LENGTHSCALE_PRIOR.0 - 1.0) / LENGTHSCALE_PRIOR.1;
    starts.push(pack(&GpHyperparams::new(mode_s2, vec![mode_l; d], 0.0)));
    let mut r = rng(seed);
    let g_s = Gamma::new(SCALE_PRIOR.0, 1.0 / SCALE_PRIOR.1).expect("valid gamma");
    let g_l = Gamma::new(LENGTHSCALE_PRIOR.0, 1.0 / LENGTHSCALE_PRIOR.1).expect("valid gamma");
    for _ in 0..opts.prior_restarts {
        let s2: f64 = g_s.sample(&mut r);
        let ls: Vec<f64> = (0..d).map(|_| g_l.sample(&mut r)).collect();
        starts.push(pack(&GpHyperparams::new(s2, ls, 0.0)));
    }
    for s in &mut starts {
        pb.project(s);
    }
    let best = multistart_minimize(|t, g| objective(t, &x, &y, g), &starts, &pb, &opts.qn)
        .filter(|r| r.value.is_finite())
        .ok_or(Error::NotPositiveDefinite { jitter: f64::NAN })?;
    let hp = unpack(&best.x);
    Surrogate::condition_with(bounds.clone(), inputs, targets, hp, output)
}

/// Conditions with fixed noise and default prior-mode hyperparameters.
pub fn prior_mode_hyperparams(d: usize) -> GpHyperparams {
    let mut hp = GpHyperparams::new(
        (SCALE_PRIOR.0 - 1.0) / SCALE_PRIOR.1,
        vec![(LENGTHSCALE_PRIOR.0 - 1.0) / LENGTHSCALE_PRIOR.1; d],
        0.0,
    );
    hp.noise_variance = NOISE_VARIANCE;
    hp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_differences() {
        let x = Matrix::from_rows(&[[0.1, 0.9], [0.4, 0.3], [0.8, 0.6], [0.35, 0.55], [0.9, 0.05]]);
        let y = [0.3, -1.2, 0.9, 0.1, -0.4];
        let theta = [0.2, -1.1, -0.6, 0.15];
        let mut g = [0.0; 4];
        objective(&theta, &x, &y, &mut g);
        let mut scratch = [0.0; 4];
        for j in 0..4 {
            let h = 1e-6;
            let (mut tp, mut tm) = (theta, theta);
            tp[j] += h;
            tm[j] -= h;
            let fd = (objective(&tp, &x, &y, &mut scratch) - objective(&tm, &x, &y, &mut scratch)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + fd.abs()), "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn objective_matches_lml_plus_prior() {
        let x = Matrix::from_rows(&[[0.1], [0.5], [0.7]]);
        let y = [1.0, -0.5, 0.2];
        let theta = [0.4, -1.3, 0.05];
        let hp = unpack(&theta);
        let want = log_marginal_likelihood(&x, &y, &hp).unwrap() + log_prior(&hp);
        let got = -objective(&theta, &x, &y, &mut [0.0; 3]);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn single_observation_lengthscale_at_prior_mode() {
        let b = Bounds::unit(2);
        let gp = fit_map(&b, &Matrix::from_rows(&[[0.3, 0.6]]), &[4.2], 3, None, &FitOptions::default()).unwrap();
        for l in &gp.hyperparams().lengthscales {
            assert!((l - 0.2).abs() < 1e-3, "{l}");
        }
    }

    #[test]
    fn constant_targets_fit_is_finite() {
        let b = Bounds::unit(1);
        let x = Matrix::from_rows(&[[0.1], [0.5], [0.9]]);
        let gp = fit_map(&b, &x, &[2.0, 2.0, 2.0], 1, None, &FitOptions::default()).unwrap();
        assert!(gp.hyperparams().is_valid());
        let (m, v) = gp.predict(&[0.3], &mut gp.workspace());
        assert!(m.is_finite() && v.is_finite());
    }

    #[test]
    fn rejects_points_outside_the_box() {
        let b = Bounds::unit(1);
        let r = fit_map(&b, &Matrix::from_rows(&[[1.5]]), &[0.0], 1, None, &FitOptions::default());
        assert!(matches!(r, Err(Error::OutOfBounds { .. })));
    }
}
