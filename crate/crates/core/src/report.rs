//! Order-statistic aggregation of failure-probability trajectories.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Floor applied before plotting on a logarithmic axis.
pub const LOG_FLOOR: f64 = 1e-12;

/// Quantile of sorted data by inclusive linear interpolation: position
/// `(n − 1)·q` between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// One repeat's trajectory: `(n, p_true)` pairs in increasing `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub n: Vec<usize>,
    pub p: Vec<f64>,
}

/// Median and quartiles of many trajectories over a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub problem: String,
    pub algorithm: String,
    pub n: Vec<usize>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    pub repeats: usize,
}

/// Aggregates trajectories that share a grid. The result does not depend on
/// the order of `traces`.
pub fn aggregate(problem: &str, algorithm: &str, traces: &[Trajectory]) -> Result<AggregateCurve> {
    let first = traces.first().ok_or_else(|| Error::GridMismatch(format!("{problem}/{algorithm}: no traces")))?;
    let bad: Vec<&str> = traces.iter().filter(|t| t.n != first.n || t.p.len() != t.n.len()).map(|t| t.label.as_str()).collect();
    if !bad.is_empty() {
        return Err(Error::GridMismatch(format!(
            "{problem}/{algorithm}: grid differs from `{}` in {}",
            first.label,
            bad.join(", ")
        )));
    }
    let m = first.n.len();
    let (mut lower, mut median, mut upper) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    let mut col = Vec::with_capacity(traces.len());
    for k in 0..m {
        col.clear();
        col.extend(traces.iter().map(|t| t.p[k]));
        col.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&col, 0.25));
        median.push(quantile_sorted(&col, 0.5));
        upper.push(quantile_sorted(&col, 0.75));
    }
    Ok(AggregateCurve {
        problem: problem.into(),
        algorithm: algorithm.into(),
        n: first.n.clone(),
        lower,
        median,
        upper,
        repeats: traces.len(),
    })
}

/// Truncates every trajectory to the common prefix of their grids, so that
/// repeats of different length (for example a run still in progress) can be
/// aggregated over the evaluations they all reached.
pub fn common_prefix(traces: &mut [Trajectory]) {
    let Some(first) = traces.first() else { return };
    let mut len = first.n.len();
    let reference = first.n.clone();
    for t in traces.iter() {
        let l = t.n.iter().zip(&reference).take_while(|(a, b)| a == b).count();
        len = len.min(l);
    }
    for t in traces.iter_mut() {
        t.n.truncate(len);
        t.p.truncate(len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn traj(label: &str, p: &[f64]) -> Trajectory {
        Trajectory { label: label.into(), n: (0..p.len()).collect(), p: p.to_vec() }
    }

    #[test]
    fn quantile_convention() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn single_trace_and_median() {
        let one = aggregate("p", "a", &[traj("r0", &[0.5, 0.1])]).unwrap();
        assert_eq!(one.lower, one.median);
        assert_eq!(one.upper, one.median);
        let three = aggregate("p", "a", &[traj("a", &[1e-3]), traj("b", &[1e-5]), traj("c", &[1e-4])]).unwrap();
        assert_eq!(three.median, vec![1e-4]);
    }

    #[test]
    fn mismatched_grids_are_named() {
        let mut b = traj("r1", &[0.1, 0.2]);
        b.n = vec![0, 2];
        let err = aggregate("p", "a", &[traj("r0", &[0.1, 0.2]), b]).unwrap_err();
        assert!(format!("{err}").contains("r1"));
    }

    #[test]
    fn prefix_truncation() {
        let mut t = vec![traj("a", &[1.0, 2.0, 3.0]), traj("b", &[1.0, 2.0])];
        common_prefix(&mut t);
        assert_eq!(t[0].n.len(), 2);
    }
}
