//! DIRECT (DIviding RECTangles) global search for derivative-free objectives.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::Bounds;

/// Relative improvement required of a potentially optimal rectangle.
const EPSILON: f64 = 1e-4;

#[derive(Debug, Clone)]
struct Rect {
    center: Vec<f64>,
    /// Side length of dimension `j` is `3^-levels[j]` (unit cube coordinates).
    levels: Vec<u32>,
    value: f64,
}

impl Rect {
    fn size(&self) -> f64 {
        let s: f64 = self.levels.iter().map(|&l| libm::pow(3.0, -2.0 * l as f64)).sum();
        0.5 * libm::sqrt(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `f` over `bounds` with at most `budget` evaluations.
///
/// Runs in the unit cube, so the sample tree is invariant to affine
/// rescaling of the box. On ties the earliest sampled point wins, which
/// makes a constant objective return the box center.
pub fn direct_maximize<F>(mut f: F, bounds: &Bounds, budget: usize) -> DirectResult
where
    F: FnMut(&[f64]) -> f64,
{
    let d = bounds.dim();
    let mut y = vec![0.0; d];
    // Minimize the negation internally; NaN counts as the worst value.
    let mut eval = |u: &[f64], y: &mut [f64]| -> f64 {
        bounds.from_unit(u, y);
        let v = -f(y);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let c0 = vec![0.5; d];
    let v0 = eval(&c0, &mut y);
    let mut rects = vec![Rect { center: c0, levels: vec![0; d], value: v0 }];
    let mut evals = 1;
    let mut best = 0usize;

    while evals < budget {
        let selected = potentially_optimal(&rects, rects[best].value);
        let mut progressed = false;
        for idx in selected {
            let min_level = *rects[idx].levels.iter().min().expect("d >= 1");
            let long: Vec<usize> = (0..d).filter(|&j| rects[idx].levels[j] == min_level).collect();
            if evals + 2 * long.len() > budget {
                continue;
            }
            let delta = libm::pow(3.0, -(min_level as f64 + 1.0));
            let mut samples = Vec::with_capacity(long.len());
            for &j in &long {
                let mut cp = rects[idx].center.clone();
                cp[j] += delta;
                let mut cm = rects[idx].center.clone();
                cm[j] -= delta;
                let vp = eval(&cp, &mut y);
                let vm = eval(&cm, &mut y);
                evals += 2;
                samples.push((j, vp.min(vm), cp, vp, cm, vm));
            }
            progressed = true;
            // Split along the most promising dimensions first so the best
            // samples end up in the largest children.
            samples.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            for (j, _, cp, vp, cm, vm) in samples {
                rects[idx].levels[j] += 1;
                let levels = rects[idx].levels.clone();
                rects.push(Rect { center: cp, levels: levels.clone(), value: vp });
                let n = rects.len() - 1;
                if vp < rects[best].value {
                    best = n;
                }
                rects.push(Rect { center: cm, levels, value: vm });
                if vm < rects[best].value {
                    best = n + 1;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    let mut x = vec![0.0; d];
    bounds.from_unit(&rects[best].center, &mut x);
    let value = -rects[best].value;
    DirectResult { x, value, evaluations: evals }
}

/// Indices of potentially optimal rectangles: for some rate constant `K > 0`
/// they minimize `value - K·size` and improve on the incumbent by `EPSILON`.
fn potentially_optimal(rects: &[Rect], fmin: f64) -> Vec<usize> {
    // Best rectangle per distinct size (earliest on ties).
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for (i, r) in rects.iter().enumerate() {
        let s = r.size();
        match groups.iter_mut().find(|(gs, _)| (*gs - s).abs() <= 1e-12 * s.max(1e-300)) {
            Some(g) => {
                if r.value < rects[g.1].value {
                    g.1 = i;
                }
            }
            None => groups.push((s, i)),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    for (gi, &(sj, j)) in groups.iter().enumerate() {
        let fj = rects[j].value;
        let mut k_low: f64 = 0.0;
        let mut k_high = f64::INFINITY;
        for (gk, &(si, i)) in groups.iter().enumerate() {
            if gk == gi {
                continue;
            }
            let fi = rects[i].value;
            if si < sj {
                k_low = k_low.max((fj - fi) / (sj - si));
            } else {
                k_high = k_high.min((fi - fj) / (si - sj));
            }
        }
        if k_low > k_high {
            continue;
        }
        let ok = if k_high.is_finite() {
            fj - k_high * sj <= fmin - EPSILON * fmin.abs()
        } else {
            true
        };
        if ok {
            out.push(j);
        }
    }
    out.sort_unstable();
    out
}
