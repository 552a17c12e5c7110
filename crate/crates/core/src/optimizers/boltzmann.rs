//! Boltzmann selection of optimizer starting points.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::numerics::seed::rng;

/// How many restarts to draw from how many raw candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartPlan {
    pub n_raw: usize,
    pub n_restarts: usize,
    /// `None` selects the adaptive default: the standard deviation of the
    /// finite candidate values.
    pub temperature: Option<f64>,
}

fn adaptive_temperature(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return 0.0;
    }
    let m = finite.iter().sum::<f64>() / finite.len() as f64;
    let var = finite.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / finite.len() as f64;
    libm::sqrt(var)
}

/// Index of the largest value, earliest on ties. `+inf` beats everything and
/// NaN is ignored.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Samples `n_restarts` distinct candidate indices (higher values favored).
///
/// Weights are `exp((v - max v)/T)`; `-inf` values get weight zero. When the
/// temperature is zero or every value is equal, sampling is uniform. The
/// argmax is always included, replacing the last draw if necessary.
pub fn boltzmann_restarts(values: &[f64], n_restarts: usize, temperature: Option<f64>, seed: u64) -> Vec<usize> {
    let n = values.len();
    let k = n_restarts.min(n);
    if k == 0 {
        return Vec::new();
    }
    let best = argmax(values).unwrap_or(0);
    let vmax = values[best];
    let t = temperature.unwrap_or_else(|| adaptive_temperature(values));
    let mut w: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v.is_nan() || v == f64::NEG_INFINITY {
                0.0
            } else if !vmax.is_finite() {
                // Only +inf candidates carry weight when any is present.
                if v == vmax { 1.0 } else { 0.0 }
            } else if t > 0.0 && t.is_finite() {
                libm::exp((v - vmax) / t)
            } else {
                1.0
            }
        })
        .collect();
    let mut r = rng(seed);
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| w[i]).sum();
        let pick = if total > 0.0 {
            let mut target = r.random::<f64>() * total;
            let mut chosen = None;
            for i in 0..n {
                if taken[i] || w[i] == 0.0 {
                    continue;
                }
                chosen = Some(i);
                target -= w[i];
                if target < 0.0 {
                    break;
                }
            }
            chosen.expect("positive total weight has a candidate")
        } else {
            // All remaining weight underflowed: uniform over the remainder.
            let rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            rest[r.random_range(0..rest.len())]
        };
        taken[pick] = true;
        w[pick] = 0.0;
        out.push(pick);
    }
    if !out.contains(&best) {
        *out.last_mut().expect("k >= 1") = best;
    }
    out
}
