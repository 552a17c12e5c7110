//! Smoothed box-membership indicator ι.
//!
//! Each bound is treated as a random variable `a_j + δ·Z/(1 + Z)` with
//! `Z ~ Gamma(1/2, 1)`, which gives the ramp `G(z) = P(1/2, z/(1 − z))` on
//! `(0, 1)`, saturating to 0 below and 1 above.

use crate::domain::Bounds;

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Smoothing widths: `delta` for the box (design units), `rho` for the
/// threshold in Thompson sampling (objective units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    pub delta: f64,
    pub rho: f64,
}

impl SmoothingConfig {
    pub const DEFAULT_RHO: f64 = 0.01;

    /// `δ = min(0.05·ℓ_min, 0.1)` and `ρ = 0.01`.
    pub fn defaults(bounds: &Bounds) -> Self {
        Self { delta: (0.05 * bounds.min_side()).min(0.1), rho: Self::DEFAULT_RHO }
    }
}

/// `G(z) = P(1/2, z/(1 − z)) = erf(√(z/(1 − z)))`.
#[inline]
pub fn ramp(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        libm::erf(libm::sqrt(z / (1.0 - z)))
    }
}

/// `log G(z)` and `d log G / dz`.
#[inline]
fn log_ramp_grad(z: f64) -> (f64, f64) {
    if z <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if z >= 1.0 {
        return (0.0, 0.0);
    }
    let t = z / (1.0 - z);
    let s = libm::sqrt(t);
    let (g, log_g) = if s > 1.0 {
        let c = libm::erfc(s);
        (1.0 - c, libm::log1p(-c))
    } else {
        let e = libm::erf(s);
        (e, libm::log(e))
    };
    let omz = 1.0 - z;
    // dG/dz = e^{-t}/√(πt) · 1/(1 − z)².
    let dg = libm::exp(-t) * INV_SQRT_PI / (s * omz * omz);
    (log_g, dg / g)
}

/// `ι(y) = ∏_j G((y_j − a_j)/δ)·G((b_j − y_j)/δ)`; `δ = 0` gives the exact
/// indicator of the closed box.
pub fn smooth_feasibility(y: &[f64], bounds: &Bounds, delta: f64) -> f64 {
    if delta <= 0.0 {
        return if bounds.contains(y) { 1.0 } else { 0.0 };
    }
    let mut p = 1.0;
    for j in 0..y.len() {
        p *= ramp((y[j] - bounds.lower()[j]) / delta) * ramp((bounds.upper()[j] - y[j]) / delta);
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

/// `log ι(y)`, optionally with its gradient. Returns `-inf` (gradient zero)
/// outside the box.
pub fn log_smooth_feasibility(y: &[f64], bounds: &Bounds, delta: f64, grad: Option<&mut [f64]>) -> f64 {
    let d = y.len();
    if delta <= 0.0 {
        if let Some(g) = grad {
            g[..d].iter_mut().for_each(|v| *v = 0.0);
        }
        return if bounds.contains(y) { 0.0 } else { f64::NEG_INFINITY };
    }
    let mut total = 0.0;
    match grad {
        None => {
            for j in 0..d {
                let lo = (y[j] - bounds.lower()[j]) / delta;
                let hi = (bounds.upper()[j] - y[j]) / delta;
                if lo >= 1.0 && hi >= 1.0 {
                    continue;
                }
                total += log_ramp_grad(lo).0 + log_ramp_grad(hi).0;
                if total == f64::NEG_INFINITY {
                    return total;
                }
            }
        }
        Some(g) => {
            for j in 0..d {
                let lo = (y[j] - bounds.lower()[j]) / delta;
                let hi = (bounds.upper()[j] - y[j]) / delta;
                if lo >= 1.0 && hi >= 1.0 {
                    g[j] = 0.0;
                    continue;
                }
                let (l1, d1) = log_ramp_grad(lo);
                let (l2, d2) = log_ramp_grad(hi);
                total += l1 + l2;
                g[j] = (d1 - d2) / delta;
            }
            if total == f64::NEG_INFINITY {
                g[..d].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        let b = Bounds::unit(1);
        assert_eq!(smooth_feasibility(&[0.5], &b, 0.1), 1.0);
        assert_eq!(smooth_feasibility(&[0.0], &b, 0.1), 0.0);
        assert_eq!(smooth_feasibility(&[-0.1], &b, 0.1), 0.0);
        assert!((smooth_feasibility(&[0.05], &b, 0.1) - 0.842_700_792_949_714_9).abs() < 1e-12);
        assert_eq!(smooth_feasibility(&[1.0], &b, 0.0), 1.0);
        assert_eq!(smooth_feasibility(&[1.0 + 1e-12], &b, 0.0), 0.0);
    }

    #[test]
    fn ramp_matches_incomplete_gamma() {
        for z in [0.01, 0.2, 0.5, 0.77, 0.99] {
            let want = crate::numerics::regularized_lower_gamma(0.5, z / (1.0 - z)).unwrap();
            assert!((ramp(z) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn log_gradient_matches_differences() {
        let b = Bounds::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let y = [0.04, 0.93];
        let mut g = [0.0; 2];
        let l = log_smooth_feasibility(&y, &b, 0.1, Some(&mut g));
        assert!((libm::exp(l) - smooth_feasibility(&y, &b, 0.1)).abs() < 1e-14);
        for j in 0..2 {
            let h = 1e-7;
            let (mut a, mut c) = (y, y);
            a[j] += h;
            c[j] -= h;
            let fd = (log_smooth_feasibility(&a, &b, 0.1, None) - log_smooth_feasibility(&c, &b, 0.1, None)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-5 * (1.0 + fd.abs()), "{j}: {fd} vs {}", g[j]);
        }
    }
}
