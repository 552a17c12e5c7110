//! Standard normal distribution functions and the regularized incomplete gamma.
//!
//! The `normal` functions are the unchecked hot-path versions; the
//! `std_normal_*` wrappers validate their input.

use crate::error::{Error, Result};

const SQRT_2: f64 = core::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Unchecked standard normal functions. NaN propagates.
pub mod normal {
    use super::*;

    #[inline]
    pub fn cdf(x: f64) -> f64 {
        // Both tails round to exactly 0 or 1 well before these cutoffs.
        if x > 8.5 {
            return 1.0;
        }
        if x < -39.0 {
            return 0.0;
        }
        0.5 * libm::erfc(-x / SQRT_2)
    }

    #[inline]
    pub fn pdf(x: f64) -> f64 {
        INV_SQRT_2PI * libm::exp(-0.5 * x * x)
    }

    #[inline]
    pub fn log_pdf(x: f64) -> f64 {
        -0.5 * x * x - LN_SQRT_2PI
    }

    /// `log Φ(x)`, finite down to about x = -1e150.
    #[inline]
    pub fn log_cdf(x: f64) -> f64 {
        if x >= 0.0 {
            libm::log1p(-0.5 * libm::erfc(x / SQRT_2))
        } else if x > -20.0 {
            libm::log(0.5 * libm::erfc(-x / SQRT_2))
        } else {
            // Asymptotic Mills-ratio series: Φ(x) = φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶ + ...).
            let t = 1.0 / (x * x);
            let series = 1.0 - t * (1.0 - t * (3.0 - t * (15.0 - t * (105.0 - t * 945.0))));
            log_pdf(x) - libm::log(-x) + libm::log(series)
        }
    }

    /// `log(1 - Φ(x))`.
    #[inline]
    pub fn log_sf(x: f64) -> f64 {
        log_cdf(-x)
    }

    /// `φ(x) / Φ(x)`, stable for very negative x.
    #[inline]
    pub fn inverse_mills(x: f64) -> f64 {
        if x > -5.0 {
            pdf(x) / cdf(x)
        } else {
            libm::exp(log_pdf(x) - log_cdf(x))
        }
    }
}

fn check(x: f64) -> Result<f64> {
    if x.is_nan() {
        Err(Error::Domain("NaN argument to a normal distribution function"))
    } else {
        Ok(x)
    }
}

pub fn std_normal_cdf(x: f64) -> Result<f64> {
    check(x).map(normal::cdf)
}

pub fn std_normal_log_cdf(x: f64) -> Result<f64> {
    check(x).map(normal::log_cdf)
}

pub fn std_normal_pdf(x: f64) -> Result<f64> {
    check(x).map(normal::pdf)
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain("gamma shape must be positive and finite"));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain("incomplete gamma argument must be non-negative"));
    }
    Ok(lower_gamma_unchecked(a, x))
}

pub(crate) fn lower_gamma_unchecked(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        // Series: P = e^{-x} x^a / Γ(a+1) · Σ x^k / ((a+1)...(a+k)).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (libm::exp(log_prefix) * sum).clamp(0.0, 1.0)
    } else {
        // Lentz continued fraction for Q = 1 - P.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - libm::exp(log_prefix) * h).clamp(0.0, 1.0)
    }
}
