//! Thompson sampling for maximal reliability.
//!
//! A posterior path `f̃` picks the nominal design that is most reliable under
//! `f̃`; the query is then placed at the perturbation of that design where
//! the failure indicator is most uncertain, weighted by the perturbation
//! density.

use alloc::vec;
use alloc::vec::Vec;

use super::common::{maximize_from_scan, sobol_box};
use super::{AcquisitionSpec, Context, Proposal, Rule};
use crate::domain::Bounds;
use crate::error::Result;
use crate::linalg::Matrix;
use crate::numerics::gaussian::{gaussian_qmc, uniform_dims};
use crate::numerics::normal;
use crate::numerics::seed::{derive, Purpose};
use crate::numerics::SobolStream;
use crate::reliability::{draw_is_sample, estimate_ptilde, posterior_t, PerturbationModel, ValueScale};
use crate::surrogate::{draw_rff_path, Surrogate, Workspace};

/// `log α_MV(u; x) = log p(u) + log Φ_n(x + u) + log(1 − Φ_n(x + u))`,
/// optionally with its gradient in `u`. `−∞` where the indicator variance is
/// zero.
pub fn log_alpha_mv(
    gp: &Surrogate,
    x: &[f64],
    u: &[f64],
    perturb: &PerturbationModel,
    c: f64,
    ws: &mut Workspace,
    grad: Option<&mut [f64]>,
) -> f64 {
    let d = x.len();
    let mut y = vec![0.0; d];
    perturb.combine(x, u, &mut y);
    let lp = perturb.log_density(u);
    match grad {
        None => {
            let t = posterior_t(gp, &y, c, ws, None);
            lp + normal::log_cdf(t) + normal::log_sf(t)
        }
        Some(g) => {
            let mut gt = vec![0.0; d];
            let t = posterior_t(gp, &y, c, ws, Some(&mut gt));
            let v = lp + normal::log_cdf(t) + normal::log_sf(t);
            perturb.log_density_grad(u, g);
            if t.is_finite() {
                let k = normal::inverse_mills(t) - normal::inverse_mills(-t);
                for j in 0..d {
                    g[j] += k * gt[j];
                }
            }
            v
        }
    }
}

/// Box of admissible perturbations `{u : x + u ∈ Y_feas}`.
fn perturbation_box(bounds: &Bounds, x: &[f64]) -> Result<Bounds> {
    let lower: Vec<f64> = (0..x.len()).map(|j| bounds.lower()[j] - x[j]).collect();
    let upper: Vec<f64> = (0..x.len()).map(|j| bounds.upper()[j] - x[j]).collect();
    Bounds::new(lower, upper)
}

pub fn ts_mr_next(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Proposal> {
    let gp = ctx.surrogate()?;
    let problem = ctx.problem;
    let bounds = &problem.bounds;
    let n = ctx.n as u64;
    let d = problem.dim();
    let c = problem.threshold;

    let path = draw_rff_path(gp, spec.n_rff, derive(ctx.seed, Purpose::Rff, n));
    let is = draw_is_sample(&problem.perturbation, spec.tau, spec.n_u, derive(ctx.seed, Purpose::IsSample, n))?;

    // Nominal design: maximize −log P̃.
    let cands = sobol_box(bounds, spec.n_raw, derive(ctx.seed, Purpose::Restarts, n))?;
    let nominal = maximize_from_scan(
        |x, g| {
            let e = estimate_ptilde(&path, x, &is, bounds, spec.delta, spec.rho, c, ValueScale::Log, g.is_some());
            if let Some(g) = g {
                g.copy_from_slice(&e.grad);
            }
            e.value
        },
        bounds,
        &cands,
        &[],
        spec,
        derive(ctx.seed, Purpose::Restarts, n << 8 | 3),
    );
    let x = nominal.x;

    // Perturbation: maximize log α_MV over the admissible box.
    let ubox = perturbation_box(bounds, &x)?;
    let mut stream = SobolStream::scrambled(uniform_dims(d), derive(ctx.seed, Purpose::Restarts, n << 8 | 4))?;
    let draws = gaussian_qmc(&mut stream, spec.n_raw, &vec![0.0; d], problem.sigma())?;
    let mut ucands = Matrix::zeros(0, d);
    ucands.push_row(&vec![0.0; d]);
    for r in draws.iter_rows() {
        let mut u = r.to_vec();
        ubox.project(&mut u);
        ucands.push_row(&u);
    }
    let mut ws = gp.workspace();
    let best_u = maximize_from_scan(
        |u, g| log_alpha_mv(gp, &x, u, &problem.perturbation, c, &mut ws, g),
        &ubox,
        &ucands,
        &[],
        spec,
        derive(ctx.seed, Purpose::Restarts, n << 8 | 5),
    );
    let mut y = vec![0.0; d];
    problem.perturbation.combine(&x, &best_u.x, &mut y);
    bounds.project(&mut y);
    let mut p = Proposal::new(y, best_u.value, Rule::Thompson);
    p.nominal = Some(x);
    p.perturbation = Some(best_u.x);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{GpHyperparams, OutputTransform};

    #[test]
    fn flat_posterior_prefers_zero_perturbation() {
        // μ ≡ c makes Φ_n ≡ 1/2, so α_MV ∝ p(u).
        let hp = GpHyperparams::new(1.0, vec![0.3, 0.3], 2.0);
        let gp = Surrogate::prior(Bounds::unit(2), hp, OutputTransform::IDENTITY);
        let p = PerturbationModel::isotropic(2, 0.05).unwrap();
        let mut ws = gp.workspace();
        let x = [0.5, 0.5];
        let at0 = log_alpha_mv(&gp, &x, &[0.0, 0.0], &p, 2.0, &mut ws, None);
        assert!((at0 - (p.log_density(&[0.0, 0.0]) + 2.0 * libm::log(0.5))).abs() < 1e-12);
        assert!(log_alpha_mv(&gp, &x, &[0.03, -0.01], &p, 2.0, &mut ws, None) < at0);
    }

    #[test]
    fn gradient_matches_differences() {
        let pts = [[0.1, 0.2], [0.7, 0.4], [0.4, 0.9], [0.5, 0.5], [0.9, 0.8]];
        let x = Matrix::from_rows(&pts);
        let y: Vec<f64> = pts.iter().map(|p| p[0] * 2.0 - p[1]).collect();
        let gp = Surrogate::condition(Bounds::unit(2), &x, &y, GpHyperparams::new(1.0, vec![0.4, 0.5], 0.0)).unwrap();
        let p = PerturbationModel::new(vec![0.05, 0.08]).unwrap();
        let mut ws = gp.workspace();
        let xn = [0.35, 0.6];
        let u = [0.02, -0.05];
        let mut g = [0.0; 2];
        log_alpha_mv(&gp, &xn, &u, &p, 0.1, &mut ws, Some(&mut g));
        for j in 0..2 {
            let h = 1e-6;
            let (mut a, mut b) = (u, u);
            a[j] += h;
            b[j] -= h;
            let fd = (log_alpha_mv(&gp, &xn, &a, &p, 0.1, &mut ws, None) - log_alpha_mv(&gp, &xn, &b, &p, 0.1, &mut ws, None)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", g[j]);
        }
    }
}
