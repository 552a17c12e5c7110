//! Expected feasibility, `E[max(ε − |c − f|, 0)]` with `ε = κσ`.

use super::common::{maximize_from_scan, sobol_box};
use super::{AcquisitionSpec, Context, Proposal, Rule};
use crate::error::Result;
use crate::numerics::normal::{cdf, pdf};
use crate::numerics::seed::{derive, Purpose};
use crate::surrogate::Prediction;

/// `h(m) = −m[2Φ(m) − Φ(m−κ) − Φ(m+κ)] − [2φ(m) − φ(m−κ) − φ(m+κ)] + κ[Φ(m+κ) − Φ(m−κ)]`
/// and `h'(m) = −[2Φ(m) − Φ(m−κ) − Φ(m+κ)]`, `m = (c − μ)/σ`.
#[inline]
fn h(m: f64, kappa: f64) -> (f64, f64) {
    let (a, b) = (m - kappa, m + kappa);
    let big = 2.0 * cdf(m) - cdf(a) - cdf(b);
    let small = 2.0 * pdf(m) - pdf(a) - pdf(b);
    let v = -m * big - small + kappa * (cdf(b) - cdf(a));
    (v.max(0.0), -big)
}

/// Closed-form expected feasibility for `f ~ N(μ, σ²)`.
pub fn expected_feasibility(mean: f64, sd: f64, c: f64, kappa: f64) -> f64 {
    if !(sd > 0.0) || kappa == 0.0 {
        return 0.0;
    }
    sd * h((c - mean) / sd, kappa).0
}

/// Expected feasibility with derivatives with respect to `μ` and `σ`.
pub fn expected_feasibility_grad(mean: f64, sd: f64, c: f64, kappa: f64) -> (f64, f64, f64) {
    if !(sd > 0.0) || kappa == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let m = (c - mean) / sd;
    let (hv, hp) = h(m, kappa);
    // α = σ·h(m): ∂α/∂μ = −h'(m), ∂α/∂σ = h(m) − m·h'(m).
    (sd * hv, -hp, hv - m * hp)
}

pub(crate) fn egra_next(ctx: &Context<'_>, spec: &AcquisitionSpec) -> Result<Proposal> {
    let gp = ctx.surrogate()?;
    let c = ctx.problem.threshold;
    let bounds = &ctx.problem.bounds;
    let cands = sobol_box(bounds, spec.n_raw, derive(ctx.seed, Purpose::Restarts, ctx.n as u64))?;
    let mut ws = gp.workspace();
    let mut pred = Prediction::default();
    let best = maximize_from_scan(
        |y, g| {
            gp.predict_grad(y, &mut ws, &mut pred);
            let sd = libm::sqrt(pred.var);
            let (a, d_mu, d_sd) = expected_feasibility_grad(pred.mean, sd, c, spec.kappa);
            if let Some(g) = g {
                for j in 0..y.len() {
                    g[j] = d_mu * pred.dmean[j] + d_sd * pred.dvar[j] / (2.0 * sd);
                }
            }
            a
        },
        bounds,
        &cands,
        &[],
        spec,
        derive(ctx.seed, Purpose::Restarts, (ctx.n as u64) << 8 | 2),
    );
    Ok(Proposal::new(best.x, best.value, Rule::Egra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seed::rng;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn mc(mean: f64, sd: f64, c: f64, kappa: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut r = rng(seed);
        let eps = kappa * sd;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut r);
            let v = (eps - (c - (mean + sd * z)).abs()).max(0.0);
            s1 += v;
            s2 += v * v;
        }
        let m = s1 / n as f64;
        (m, libm::sqrt((s2 / n as f64 - m * m) / n as f64))
    }

    #[test]
    fn matches_monte_carlo() {
        let mut r = rng(11);
        for k in 0..12 {
            let mean = r.random_range(-2.0..2.0);
            let sd = r.random_range(0.05..2.0);
            let c = r.random_range(-2.0..2.0);
            let kappa = r.random_range(0.2..3.0);
            let a = expected_feasibility(mean, sd, c, kappa);
            let (m, se) = mc(mean, sd, c, kappa, 200_000, k);
            assert!((a - m).abs() <= 3.0 * se + 1e-9, "{k}: {a} vs {m} ± {se}");
        }
    }

    #[test]
    fn centered_band_value() {
        // μ = c, κ = 2: σ·[4Φ(2) − 2 − 2φ(0) + 2φ(2)].
        let want = 4.0 * cdf(2.0) - 2.0 - 2.0 * pdf(0.0) + 2.0 * pdf(2.0);
        assert!((expected_feasibility(1.0, 1.0, 1.0, 2.0) - want).abs() < 1e-14);
    }

    #[test]
    fn degenerate_cases() {
        assert!(expected_feasibility(0.0, 0.1, 10.0, 2.0) < 1e-12);
        assert_eq!(expected_feasibility(0.0, 1.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn derivatives_match_differences() {
        for (mean, sd) in [(0.3, 0.8), (-1.0, 0.2), (2.0, 1.5)] {
            let (_, dm, ds) = expected_feasibility_grad(mean, sd, 0.5, 2.0);
            let h = 1e-6;
            let fm = (expected_feasibility(mean + h, sd, 0.5, 2.0) - expected_feasibility(mean - h, sd, 0.5, 2.0)) / (2.0 * h);
            let fs = (expected_feasibility(mean, sd + h, 0.5, 2.0) - expected_feasibility(mean, sd - h, 0.5, 2.0)) / (2.0 * h);
            assert!((fm - dm).abs() < 1e-7 && (fs - ds).abs() < 1e-7, "{fm} {dm} {fs} {ds}");
        }
    }
}
