//! Projected limited-memory BFGS for box-constrained minimization.
//!
//! Search directions come from the two-loop recursion restricted to the
//! variables that are not held at a bound; the step is chosen by Armijo
//! backtracking along the projection arc `P(x + t·d)`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::Bounds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub pg_tol: f64,
    /// Stop when the relative reduction of the objective falls below this.
    pub f_tol: f64,
    pub memory: usize,
}

impl Default for QnOptions {
    fn default() -> Self {
        Self { max_iters: 200, pg_tol: 1e-7, f_tol: 2.220_446_049_250_313e-9, memory: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnStatus {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchFailed,
    /// The objective reached `-inf` (for example a perfect design).
    Unbounded,
    /// The objective or gradient was NaN at the start point.
    Abandoned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: QnStatus,
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..x.len() {
        let gj = if x[j] <= bounds.lower()[j] && g[j] > 0.0 {
            0.0
        } else if x[j] >= bounds.upper()[j] && g[j] < 0.0 {
            0.0
        } else {
            // Clip the step so a gradient pointing out of the box counts only
            // up to the distance to the bound.
            let t = x[j] - g[j];
            let t = t.clamp(bounds.lower()[j], bounds.upper()[j]);
            x[j] - t
        };
        m = m.max(gj.abs());
    }
    m
}

/// Minimizes `f` over `bounds` from `x0`. Value `f(x, grad)` must write the
/// gradient into `grad`.
pub fn minimize<F>(mut f: F, x0: &[f64], bounds: &Bounds, opts: &QnOptions) -> QnResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = vec![0.0; d];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if fx.is_nan() || g.iter().any(|v| v.is_nan()) {
        return QnResult { x, value: f64::NAN, iterations: 0, evaluations, status: QnStatus::Abandoned };
    }
    if fx == f64::NEG_INFINITY {
        return QnResult { x, value: fx, iterations: 0, evaluations, status: QnStatus::Unbounded };
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; d];
    let mut xt = vec![0.0; d];
    let mut gt = vec![0.0; d];
    let mut free = vec![true; d];
    let mut alpha = vec![0.0; opts.memory];

    for iter in 0..opts.max_iters {
        if projected_gradient_norm(&x, &g, bounds) < opts.pg_tol {
            return QnResult { x, value: fx, iterations: iter, evaluations, status: QnStatus::GradientTolerance };
        }
        for j in 0..d {
            free[j] = !((x[j] <= bounds.lower()[j] && g[j] > 0.0) || (x[j] >= bounds.upper()[j] && g[j] < 0.0));
        }

        // Two-loop recursion on the free variables.
        for j in 0..d {
            dir[j] = if free[j] { -g[j] } else { 0.0 };
        }
        let restricted_dot = |a: &[f64], b: &[f64], free: &[bool]| -> f64 {
            (0..a.len()).filter(|&j| free[j]).map(|j| a[j] * b[j]).sum()
        };
        let mut used = 0;
        for (k, (s, y, _)) in mem.iter().enumerate().rev() {
            let sy = restricted_dot(s, y, &free);
            if sy <= 1e-16 {
                continue;
            }
            let a = restricted_dot(s, &dir, &free) / sy;
            alpha[k] = a;
            for j in 0..d {
                if free[j] {
                    dir[j] -= a * y[j];
                }
            }
            used += 1;
        }
        if let Some((s, y, _)) = mem.back() {
            let sy = restricted_dot(s, y, &free);
            let yy = restricted_dot(y, y, &free);
            if sy > 1e-16 && yy > 0.0 {
                let gamma = sy / yy;
                dir.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for (k, (s, y, _)) in mem.iter().enumerate() {
            let sy = restricted_dot(s, y, &free);
            if sy <= 1e-16 {
                continue;
            }
            let b = restricted_dot(y, &dir, &free) / sy;
            for j in 0..d {
                if free[j] {
                    dir[j] += (alpha[k] - b) * s[j];
                }
            }
        }
        let mut slope = crate::linalg::dot(&dir, &g);
        if !(slope < 0.0) {
            for j in 0..d {
                dir[j] = if free[j] { -g[j] } else { 0.0 };
            }
            slope = crate::linalg::dot(&dir, &g);
            mem.clear();
            used = 0;
        }
        let mut t = if used == 0 {
            let gn = libm::sqrt(restricted_dot(&g, &g, &free));
            if gn > 0.0 { (1.0 / gn).min(1.0) } else { 1.0 }
        } else {
            1.0
        };

        // Armijo backtracking along the projection arc.
        let mut accepted = false;
        let mut ft = fx;
        for _ in 0..40 {
            for j in 0..d {
                xt[j] = x[j] + t * dir[j];
            }
            bounds.project(&mut xt);
            let decrease: f64 = (0..d).map(|j| g[j] * (xt[j] - x[j])).sum();
            if decrease >= 0.0 && xt == x {
                break;
            }
            ft = f(&xt, &mut gt);
            evaluations += 1;
            if ft == f64::NEG_INFINITY {
                return QnResult { x: xt, value: ft, iterations: iter + 1, evaluations, status: QnStatus::Unbounded };
            }
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * decrease.min(0.0) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if !mem.is_empty() {
                mem.clear();
                continue;
            }
            return QnResult { x, value: fx, iterations: iter, evaluations, status: QnStatus::LineSearchFailed };
        }

        let s: Vec<f64> = (0..d).map(|j| xt[j] - x[j]).collect();
        let y: Vec<f64> = (0..d).map(|j| gt[j] - g[j]).collect();
        let sy = crate::linalg::dot(&s, &y);
        let yy = crate::linalg::dot(&y, &y);
        if sy > 2.2e-16 * yy && sy > 0.0 {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, sy));
        }
        let rel = (fx - ft) / fx.abs().max(ft.abs()).max(1.0);
        x.copy_from_slice(&xt);
        g.copy_from_slice(&gt);
        fx = ft;
        if rel <= opts.f_tol {
            return QnResult { x, value: fx, iterations: iter + 1, evaluations, status: QnStatus::FunctionTolerance };
        }
    }
    QnResult { x, value: fx, iterations: opts.max_iters, evaluations, status: QnStatus::MaxIterations }
}

/// Outcome of a multistart run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultistartResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Index of the start that produced the best value.
    pub best_start: usize,
    pub runs: Vec<QnResult>,
}

/// Runs [`minimize`] from every start and keeps the lowest value (earliest
/// start on ties). Abandoned starts are skipped. Returns `None` when every
/// start was abandoned.
pub fn multistart_minimize<F>(mut f: F, starts: &[Vec<f64>], bounds: &Bounds, opts: &QnOptions) -> Option<MultistartResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut runs: Vec<QnResult> = Vec::with_capacity(starts.len());
    let mut best: Option<usize> = None;
    for (i, s) in starts.iter().enumerate() {
        let r = minimize(&mut f, s, bounds, opts);
        let better = match best {
            None => true,
            Some(b) => r.value < runs[b].value,
        };
        if r.status != QnStatus::Abandoned && better {
            best = Some(i);
        }
        runs.push(r);
        if runs[i].status == QnStatus::Unbounded && best == Some(i) {
            break;
        }
    }
    let b = best?;
    Some(MultistartResult { x: runs[b].x.clone(), value: runs[b].value, best_start: b, runs })
}

/// Maximizing counterpart of [`multistart_minimize`]; reported values are in
/// the maximization sense.
pub fn multistart_maximize<F>(mut f: F, starts: &[Vec<f64>], bounds: &Bounds, opts: &QnOptions) -> Option<MultistartResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let neg = |x: &[f64], g: &mut [f64]| {
        let v = f(x, g);
        g.iter_mut().for_each(|v| *v = -*v);
        -v
    };
    let mut r = multistart_minimize(neg, starts, bounds, opts)?;
    r.value = -r.value;
    for run in &mut r.runs {
        run.value = -run.value;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::functions::branin;

    fn quad(m: [f64; 2]) -> impl FnMut(&[f64], &mut [f64]) -> f64 {
        move |x, g| {
            g[0] = 2.0 * (x[0] - m[0]);
            g[1] = 2.0 * (x[1] - m[1]);
            (x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2)
        }
    }

    #[test]
    fn convex_quadratic() {
        let r = minimize(quad([0.3, 0.7]), &[0.9, 0.1], &Bounds::unit(2), &QnOptions::default());
        assert!((r.x[0] - 0.3).abs() < 1e-6 && (r.x[1] - 0.7).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn active_bounds() {
        let r = minimize(quad([1.4, -0.2]), &[0.5, 0.5], &Bounds::unit(2), &QnOptions::default());
        assert_eq!(r.x, vec![1.0, 0.0]);
    }

    #[test]
    fn ill_conditioned_rosenbrock() {
        let b = Bounds::cube(2, -2.0, 2.0);
        let r = minimize(
            |x, g| {
                g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
                g[1] = 200.0 * (x[1] - x[0] * x[0]);
                (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
            },
            &[-1.2, 1.0],
            &b,
            &QnOptions { f_tol: 0.0, ..QnOptions::default() },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn branin_multistart() {
        let b = Bounds::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        let mut s = crate::numerics::SobolStream::scrambled(2, 11).unwrap();
        let u = s.points(10).unwrap();
        let starts: Vec<Vec<f64>> = u
            .iter_rows()
            .map(|r| {
                let mut p = vec![0.0; 2];
                b.from_unit(r, &mut p);
                p
            })
            .collect();
        let r = multistart_minimize(
            |x, g| {
                let h = 1e-7;
                for j in 0..2 {
                    let (mut a, mut c) = ([x[0], x[1]], [x[0], x[1]]);
                    a[j] += h;
                    c[j] -= h;
                    g[j] = (branin(&a) - branin(&c)) / (2.0 * h);
                }
                branin(x)
            },
            &starts,
            &b,
            &QnOptions::default(),
        )
        .unwrap();
        assert!((r.value - 0.397_887_357_729_738_2).abs() < 1e-3, "{}", r.value);
        for run in &r.runs {
            assert!(b.contains(&run.x));
        }
    }

    #[test]
    fn nan_start_is_abandoned() {
        let starts = vec![vec![0.5], vec![0.2]];
        let r = multistart_minimize(
            |x, g| {
                if x[0] == 0.5 {
                    g[0] = f64::NAN;
                    return f64::NAN;
                }
                g[0] = 2.0 * x[0];
                x[0] * x[0]
            },
            &starts,
            &Bounds::cube(1, -1.0, 1.0),
            &QnOptions::default(),
        )
        .unwrap();
        assert_eq!(r.runs[0].status, QnStatus::Abandoned);
        assert_eq!(r.best_start, 1);
        assert!(r.x[0].abs() < 1e-6);
    }
}
