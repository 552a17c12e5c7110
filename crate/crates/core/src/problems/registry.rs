use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{expand_sigma, HcParams, Mode, Objective, Problem};
use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::numerics::SobolStream;
use crate::reliability::PerturbationModel;
use crate::surrogate::{prior_path, RffPath, DEFAULT_FEATURES};

/// Pinned generator seeds for the GP sample problems, indexed like
/// `[2D, 8D, 16D]`.
pub const GP_PROBLEM_SEEDS: [u64; 3] = [53, 2, 117];

/// Names of all shipped problems in the 3×4 suite layout order (row-major;
/// GP problems form the first column, the last column holds problems where
/// model-based focusing is not expected to help).
pub const SUITE_LAYOUT: [&str; 12] = [
    "gp-2d",
    "branin-2d",
    "six-hump-camel-2d",
    "quadratic-2d",
    "gp-8d",
    "ackley-2d",
    "styblinski-tang-2d",
    "hartmann-6d-high",
    "gp-16d",
    "hartmann-6d",
    "styblinski-tang-10d-cropped",
    "styblinski-tang-10d",
];

pub fn problem_names() -> &'static [&'static str] {
    &SUITE_LAYOUT
}

struct GpSpec {
    d: usize,
    lengthscale: f64,
    extreme: (f64, f64),
    non_extreme: (f64, f64),
    n0: usize,
    eps_s: f64,
    delta: f64,
}

const GP_SPECS: [GpSpec; 3] = [
    GpSpec { d: 2, lengthscale: 0.28, extreme: (3.6, 0.04), non_extreme: (3.6, 0.1), n0: 6, eps_s: 0.014, delta: 0.6 },
    GpSpec { d: 8, lengthscale: 0.57, extreme: (1.2, 0.06), non_extreme: (-1.4, 0.1), n0: 15, eps_s: 0.028, delta: 0.6 },
    GpSpec { d: 16, lengthscale: 0.8, extreme: (0.6, 0.07), non_extreme: (-4.5, 0.1), n0: 30, eps_s: 0.04, delta: 0.6 },
];

/// GP prior output variance of the sample problems (output scale 10).
const GP_OUTPUT_VARIANCE: f64 = 100.0;

/// The RFF sample path behind a GP problem.
pub fn gp_sample_path(d: usize, seed: u64) -> Result<RffPath> {
    let spec = GP_SPECS.iter().find(|s| s.d == d).ok_or_else(|| {
        Error::UnknownProblem(format!("gp-{d}d (supported dimensions: 2, 8, 16)"))
    })?;
    Ok(prior_path(Bounds::unit(d), GP_OUTPUT_VARIANCE, &vec![spec.lengthscale; d], DEFAULT_FEATURES, seed))
}

/// Builds a GP sample problem of dimension 2, 8 or 16.
pub fn make_gp_problem(d: usize, seed: u64, mode: Mode) -> Result<Problem> {
    let spec = GP_SPECS.iter().find(|s| s.d == d).ok_or_else(|| {
        Error::UnknownProblem(format!("gp-{d}d (supported dimensions: 2, 8, 16)"))
    })?;
    let path = gp_sample_path(d, seed)?;
    let (c, sigma) = match mode {
        Mode::Extreme => spec.extreme,
        Mode::NonExtreme => spec.non_extreme,
    };
    Ok(Problem {
        name: format!("gp-{d}d"),
        objective: Objective::GpSample(Box::new(path)),
        bounds: Bounds::unit(d),
        threshold: c,
        perturbation: PerturbationModel::isotropic(d, sigma)?,
        n0: spec.n0,
        hc: HcParams { eps_s: spec.eps_s, delta: spec.delta },
        mode,
    })
}

/// Empirical `(1 − fraction)`-quantile of `f` over an `n_scan`-point Sobol'
/// scan of `bounds`, so that `fraction` of the volume has `f ≥ c`.
pub fn calibrate_threshold<F: Fn(&[f64]) -> f64>(f: F, bounds: &Bounds, target_fraction: f64, n_scan: usize) -> Result<f64> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::Config(format!("target fraction must lie in (0, 1), got {target_fraction}")));
    }
    let d = bounds.dim();
    let mut s = SobolStream::scrambled(d, 0xCA11_B2A7)?;
    let u = s.points(n_scan)?;
    let mut y = vec![0.0; d];
    let mut vals: Vec<f64> = u
        .iter_rows()
        .map(|r| {
            bounds.from_unit(r, &mut y);
            f(&y)
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(crate::report::quantile_sorted(&vals, 1.0 - target_fraction))
}

fn bounds(lower: &[f64], upper: &[f64]) -> Bounds {
    Bounds::new(lower.to_vec(), upper.to_vec()).expect("static bounds")
}

fn synthetic(
    name: &str,
    objective: Objective,
    b: Bounds,
    c: f64,
    sigma: Vec<f64>,
    n0: usize,
    eps_s: f64,
    delta: f64,
    mode: Mode,
) -> Result<Problem> {
    Ok(Problem {
        name: name.to_string(),
        objective,
        bounds: b,
        threshold: c,
        perturbation: PerturbationModel::new(sigma)?,
        n0,
        hc: HcParams { eps_s, delta },
        mode,
    })
}

/// Looks up a shipped problem by name.
pub fn problem(name: &str, mode: Mode) -> Result<Problem> {
    let ext = mode == Mode::Extreme;
    let pick = |a: Vec<f64>, b: Vec<f64>| if ext { a } else { b };
    let p = match name {
        "gp-2d" => make_gp_problem(2, GP_PROBLEM_SEEDS[0], mode)?,
        "gp-8d" => make_gp_problem(8, GP_PROBLEM_SEEDS[1], mode)?,
        "gp-16d" => make_gp_problem(16, GP_PROBLEM_SEEDS[2], mode)?,
        "branin-2d" => synthetic(
            name,
            Objective::Branin,
            bounds(&[-5.0, 0.0], &[10.0, 15.0]),
            60.0,
            pick(vec![0.8, 0.8], vec![2.5, 2.5]),
            6,
            0.21,
            10.0,
            mode,
        )?,
        "six-hump-camel-2d" => synthetic(
            name,
            Objective::SixHumpCamel,
            bounds(&[-3.0, -2.0], &[3.0, 2.0]),
            2.0,
            pick(vec![0.2, 0.1], vec![0.6, 0.3]),
            6,
            0.072,
            0.4,
            mode,
        )?,
        "ackley-2d" => synthetic(
            name,
            Objective::Ackley,
            Bounds::cube(2, -32.768, 32.768),
            20.5,
            pick(vec![3.0, 3.0], vec![8.0, 8.0]),
            6,
            0.93,
            0.2,
            mode,
        )?,
        "quadratic-2d" => synthetic(
            name,
            Objective::Quadratic,
            Bounds::unit(2),
            0.09,
            pick(vec![0.06, 0.06], vec![0.12, 0.12]),
            6,
            0.014,
            0.01,
            mode,
        )?,
        "styblinski-tang-2d" => synthetic(
            name,
            Objective::StyblinskiTang,
            Bounds::cube(2, -5.0, 5.0),
            -20.0,
            pick(vec![0.25, 0.5], vec![1.0, 2.0]),
            6,
            0.14,
            10.0,
            mode,
        )?,
        "hartmann-6d" => synthetic(
            name,
            Objective::Hartmann6,
            Bounds::unit(6),
            -1.0,
            vec![if ext { 0.05 } else { 0.1 }; 6],
            15,
            0.024,
            0.02,
            mode,
        )?,
        "hartmann-6d-high" => synthetic(
            name,
            Objective::Hartmann6,
            Bounds::unit(6),
            -0.05,
            vec![if ext { 0.07 } else { 0.18 }; 6],
            15,
            0.024,
            0.02,
            mode,
        )?,
        "styblinski-tang-10d" | "styblinski-tang-10d-cropped" => {
            let cropped = name.ends_with("cropped");
            let b = if cropped {
                let upper = [0.0, 5.0, 5.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
                bounds(&[-5.0; 10], &upper)
            } else {
                Bounds::cube(10, -5.0, 5.0)
            };
            let sigma = if ext {
                expand_sigma(&[0.4, 0.4, 0.4], 0.1, 10)?
            } else {
                expand_sigma(&[0.8, 0.8, 0.8], 0.2, 10)?
            };
            synthetic(
                name,
                Objective::StyblinskiTang,
                b,
                -300.0,
                sigma,
                50,
                if cropped { 0.22 } else { 0.32 },
                10.0,
                mode,
            )?
        }
        _ => return Err(Error::UnknownProblem(String::from(name))),
    };
    debug_assert!(p.eps_s_consistent(), "{}", p.name);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_problem_builds_and_is_consistent() {
        for mode in [Mode::Extreme, Mode::NonExtreme] {
            for name in SUITE_LAYOUT {
                let p = problem(name, mode).unwrap();
                assert!(p.eps_s_consistent(), "{name}");
                assert_eq!(p.perturbation.dim(), p.dim());
                assert!(p.n0 >= 1);
            }
        }
        assert!(matches!(problem("nope", Mode::Extreme), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn table_values() {
        let b = problem("branin-2d", Mode::Extreme).unwrap();
        assert_eq!((b.n0, b.hc.eps_s, b.hc.delta, b.threshold), (6, 0.21, 10.0, 60.0));
        let st = problem("styblinski-tang-10d", Mode::Extreme).unwrap();
        assert_eq!((st.n0, st.hc.eps_s, st.hc.delta), (50, 0.32, 10.0));
        assert_eq!(st.sigma()[3..], [0.1; 7]);
        let cr = problem("styblinski-tang-10d-cropped", Mode::Extreme).unwrap();
        assert_eq!(cr.bounds.upper(), &[0.0, 5.0, 5.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let h = problem("hartmann-6d-high", Mode::Extreme).unwrap();
        assert_eq!((h.threshold, h.sigma()[0]), (-0.05, 0.07));
        let sc = problem("six-hump-camel-2d", Mode::NonExtreme).unwrap();
        assert_eq!(sc.sigma(), &[0.6, 0.3]);
    }

    #[test]
    fn evaluate_rejects_outside_points() {
        let q = problem("quadratic-2d", Mode::Extreme).unwrap();
        assert_eq!(q.evaluate(&[0.3, 0.3]).unwrap(), 0.0);
        assert!(matches!(q.evaluate(&[1.2, 0.3]), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn calibration_of_linear_function() {
        let c = calibrate_threshold(|y| y[0], &Bounds::unit(2), 0.5, 4096).unwrap();
        assert!((c - 0.5).abs() < 0.01);
        let lo = calibrate_threshold(|y| y[0], &Bounds::unit(2), 0.999, 4096).unwrap();
        assert!(lo < 0.01);
    }

    #[test]
    fn gp_problem_is_deterministic() {
        let a = make_gp_problem(2, 5, Mode::Extreme).unwrap();
        let b = make_gp_problem(2, 5, Mode::Extreme).unwrap();
        let mut s = SobolStream::scrambled(2, 3).unwrap();
        for r in s.points(100).unwrap().iter_rows() {
            assert_eq!(a.objective.value(r), b.objective.value(r));
        }
    }
}
