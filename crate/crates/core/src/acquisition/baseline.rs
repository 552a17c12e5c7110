//! Model-free Sobol' search and expected improvement.

use alloc::vec;

use super::common::{maximize_from_scan, sobol_box};
use super::{AcquisitionSpec, Context, Proposal, Rule};
use crate::domain::Bounds;
use crate::error::Result;
use crate::numerics::normal;
use crate::numerics::seed::{derive, Purpose};
use crate::numerics::SobolStream;
use crate::surrogate::{Prediction, Surrogate};

/// Scramble seed of the run's space-filling design stream. The initial design
/// is its first `n_0` points and the Sobol' baseline continues it.
pub fn design_seed(seed: u64) -> u64 {
    derive(seed, Purpose::InitialDesign, 0)
}

/// Point `index` of the run's design stream, scaled to `bounds`.
pub fn design_point(bounds: &Bounds, seed: u64, index: usize) -> Result<alloc::vec::Vec<f64>> {
    let d = bounds.dim();
    let mut s = SobolStream::scrambled(d, design_seed(seed))?;
    s.seek(index as u64)?;
    let mut u = vec![0.0; d];
    s.next_into(&mut u)?;
    let mut y = vec![0.0; d];
    bounds.from_unit(&u, &mut y);
    Ok(y)
}

/// Next point of the scrambled Sobol' sequence, ignoring the model.
pub fn sobol_next(ctx: &Context<'_>) -> Result<Proposal> {
    let y = design_point(&ctx.problem.bounds, ctx.seed, ctx.n)?;
    Ok(Proposal::new(y, f64::NAN, Rule::Sobol))
}

/// `EI = σ·(uΦ(u) + φ(u))` with `u = (f* − μ)/σ` (minimization form) and its
/// derivatives with respect to `μ` and `σ`.
pub fn expected_improvement(mean: f64, sd: f64, incumbent: f64) -> (f64, f64, f64) {
    if !(sd > 0.0) {
        return ((incumbent - mean).max(0.0), if mean < incumbent { -1.0 } else { 0.0 }, 0.0);
    }
    let u = (incumbent - mean) / sd;
    let (cdf, pdf) = (normal::cdf(u), normal::pdf(u));
    (sd * (u * cdf + pdf), -cdf, pdf)
}

fn ei_at(gp: &Surrogate, y: &[f64], incumbent: f64, ws: &mut crate::surrogate::Workspace, pred: &mut Prediction, grad: Option<&mut [f64]>) -> f64 {
    gp.predict_grad(y, ws, pred);
    let sd = libm::sqrt(pred.var);
    let (ei, d_mu, d_sd) = expected_improvement(pred.mean, sd, incumbent);
    if let Some(g) = grad {
        for j in 0..y.len() {
            g[j] = d_mu * pred.dmean[j] + d_sd * pred.dvar[j] / (2.0 * sd);
        }
    }
    ei
}

pub(crate) fn ei_next(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Proposal> {
    let gp = ctx.surrogate()?;
    let incumbent = ctx.values.iter().copied().fold(f64::INFINITY, f64::min);
    let bounds = &ctx.problem.bounds;
    let cands = sobol_box(bounds, spec.n_raw, derive(ctx.seed, Purpose::Restarts, ctx.n as u64))?;
    let mut ws = gp.workspace();
    let mut pred = Prediction::default();
    let best = maximize_from_scan(
        |y, g| ei_at(gp, y, incumbent, &mut ws, &mut pred, g),
        bounds,
        &cands,
        &[],
        spec,
        derive(ctx.seed, Purpose::Restarts, (ctx.n as u64) << 8 | 1),
    );
    Ok(Proposal::new(best.x, best.value, Rule::Ei))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seed::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn one_sigma_improvement() {
        let (ei, _, _) = expected_improvement(1.0 - 0.7, 0.7, 1.0);
        assert!((ei / 0.7 - 1.083_315_470_587_686).abs() < 1e-12);
        // Monte Carlo oracle of E[max(f* − f, 0)].
        let mut r = rng(3);
        let n = 400_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut r);
            let imp = (1.0 - (0.3 + 0.7 * z)).max(0.0);
            s1 += imp;
            s2 += imp * imp;
        }
        let m = s1 / n as f64;
        let se = libm::sqrt((s2 / n as f64 - m * m) / n as f64);
        assert!((m - ei).abs() < 3.0 * se, "{m} vs {ei} (se {se})");
    }

    #[test]
    fn no_improvement_mass_at_floor() {
        let (ei, _, _) = expected_improvement(1.0, 1e-6, 1.0 - 1e-3);
        assert!(ei <= 1e-8);
    }

    #[test]
    fn design_stream_is_deterministic_and_inside() {
        let b = Bounds::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        for i in 0..20 {
            let a = design_point(&b, 7, i).unwrap();
            assert_eq!(a, design_point(&b, 7, i).unwrap());
            assert!(b.contains(&a));
        }
        assert_ne!(design_point(&b, 7, 3).unwrap(), design_point(&b, 8, 3).unwrap());
    }
}
