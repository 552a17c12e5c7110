//! Candidate scans and Boltzmann-seeded multistart maximization.

use alloc::vec;
use alloc::vec::Vec;

use super::AcquisitionSpec;
use crate::domain::Bounds;
use crate::error::Result;
use crate::linalg::Matrix;
use crate::numerics::SobolStream;
use crate::optimizers::{argmax, boltzmann_restarts, multistart_maximize};

/// `count` scrambled Sobol' points scaled to `bounds`.
pub(crate) fn sobol_box(bounds: &Bounds, count: usize, seed: u64) -> Result<Matrix> {
    let d = bounds.dim();
    let mut s = SobolStream::scrambled(d, seed)?;
    let mut out = s.points(count)?;
    let mut y = vec![0.0; d];
    for i in 0..count {
        bounds.from_unit(out.row(i), &mut y);
        out.row_mut(i).copy_from_slice(&y);
    }
    Ok(out)
}

/// Best point found and its value.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Scans `candidates`, picks `spec.n_restarts` of them by Boltzmann sampling
/// (argmax always kept), adds `extra` starts and polishes with multistart
/// quasi-Newton. Never returns something worse than the best candidate.
///
/// `f(x, grad)` returns the value to maximize and fills `grad` when given.
pub(crate) fn maximize_from_scan<F>(
    mut f: F,
    bounds: &Bounds,
    candidates: &Matrix,
    extra: &[Vec<f64>],
    spec: &AcquisitionSpec,
    seed: u64,
) -> Maximum
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
{
    let values: Vec<f64> = candidates.iter_rows().map(|x| f(x, None)).collect();
    let picks = boltzmann_restarts(&values, spec.n_restarts, spec.temperature, seed);
    let mut starts: Vec<Vec<f64>> = picks.iter().map(|&i| candidates.row(i).to_vec()).collect();
    starts.extend(extra.iter().cloned());
    let best_i = argmax(&values);
    let mut best = match best_i {
        Some(i) => Maximum { x: candidates.row(i).to_vec(), value: values[i] },
        None => Maximum { x: candidates.row(0).to_vec(), value: f64::NEG_INFINITY },
    };
    if best.value == f64::INFINITY {
        return best;
    }
    if let Some(r) = multistart_maximize(|x, g| f(x, Some(g)), &starts, bounds, &spec.qn) {
        if r.value > best.value || best.value.is_nan() {
            best = Maximum { x: r.x, value: r.value };
        }
    }
    best
}

/// Normalized distance `‖a − b‖ / ‖upper − lower‖`.
#[inline]
pub(crate) fn normalized_distance(a: &[f64], b: &[f64], bounds: &Bounds) -> f64 {
    crate::linalg::dist(a, b) / bounds.diagonal()
}
