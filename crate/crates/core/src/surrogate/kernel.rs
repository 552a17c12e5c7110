//! Matérn-5/2 ARD kernel.

use alloc::vec::Vec;

const SQRT5: f64 = 2.236_067_977_499_79;

/// GP hyperparameters in standardized-output, normalized-input units.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparams {
    pub output_scale_sq: f64,
    pub lengthscales: Vec<f64>,
    pub constant_mean: f64,
    pub noise_variance: f64,
}

/// Fixed observation noise variance (standardized units).
pub const NOISE_VARIANCE: f64 = 1e-4;

impl GpHyperparams {
    pub fn new(output_scale_sq: f64, lengthscales: Vec<f64>, constant_mean: f64) -> Self {
        Self { output_scale_sq, lengthscales, constant_mean, noise_variance: NOISE_VARIANCE }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn is_valid(&self) -> bool {
        self.output_scale_sq > 0.0
            && self.output_scale_sq.is_finite()
            && self.lengthscales.iter().all(|l| *l > 0.0 && l.is_finite())
            && self.constant_mean.is_finite()
    }
}

/// Precomputed form of the kernel for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct Matern52 {
    pub s2: f64,
    pub inv_ls2: Vec<f64>,
}

impl Matern52 {
    pub fn new(hp: &GpHyperparams) -> Self {
        Self { s2: hp.output_scale_sq, inv_ls2: hp.lengthscales.iter().map(|l| 1.0 / (l * l)).collect() }
    }

    #[inline]
    pub fn r2(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..a.len() {
            let d = a[j] - b[j];
            s += d * d * self.inv_ls2[j];
        }
        s
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = libm::sqrt(self.r2(a, b));
        let sr = SQRT5 * r;
        self.s2 * (1.0 + sr + sr * sr / 3.0) * libm::exp(-sr)
    }

    /// Kernel value and gradient with respect to `a`, written into `grad`.
    #[inline]
    pub fn eval_grad(&self, a: &[f64], b: &[f64], grad: &mut [f64]) -> f64 {
        let r = libm::sqrt(self.r2(a, b));
        let sr = SQRT5 * r;
        let e = libm::exp(-sr);
        let k = self.s2 * (1.0 + sr + sr * sr / 3.0) * e;
        // dk/da_j = -s²·(5/3)(1 + √5 r)e^{-√5 r}·(a_j - b_j)/ℓ_j².
        let c = -self.s2 * (5.0 / 3.0) * (1.0 + sr) * e;
        for j in 0..a.len() {
            grad[j] = c * (a[j] - b[j]) * self.inv_ls2[j];
        }
        k
    }
}

/// `k(a, b) = s²(1 + √5r + 5r²/3)e^{-√5r}` with ARD-scaled distance `r`.
pub fn kernel_matern52(a: &[f64], b: &[f64], hp: &GpHyperparams) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&hp.lengthscales)
        .map(|((x, y), l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum();
    let sr = SQRT5 * libm::sqrt(r2);
    hp.output_scale_sq * (1.0 + sr + sr * sr / 3.0) * libm::exp(-sr)
}
