//! Gaussian quasi-Monte Carlo draws via the trigonometric Box-Muller map.

use alloc::format;

use super::sobol::SobolStream;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Maps a uniform pair to two independent standard normals.
///
/// `u1 = 0` is clamped to the smallest positive normal double so the raw
/// (unscrambled) Sobol' origin does not produce infinities.
#[inline]
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = libm::sqrt(-2.0 * libm::log(u1.max(f64::MIN_POSITIVE)));
    let (s, c) = libm::sincos(TWO_PI * u2);
    (r * c, r * s)
}

/// Number of uniform coordinates needed for `d` Gaussian coordinates.
pub fn uniform_dims(d: usize) -> usize {
    2 * d.div_ceil(2)
}

/// Draws `count` rows of `mean + scale ⊙ z`, with `z` obtained from
/// consecutive coordinate pairs of the stream.
pub fn gaussian_qmc(stream: &mut SobolStream, count: usize, mean: &[f64], scale_diag: &[f64]) -> Result<Matrix> {
    let d = mean.len();
    if scale_diag.len() != d {
        return Err(Error::Config(format!(
            "scale has {} entries but mean has {d}",
            scale_diag.len()
        )));
    }
    if let Some(s) = scale_diag.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::Config(format!("Gaussian scale must be positive and finite, got {s}")));
    }
    if stream.dimension() < uniform_dims(d) {
        return Err(Error::Config(format!(
            "stream dimension {} too small for {d} Gaussian coordinates",
            stream.dimension()
        )));
    }
    let u = stream.points(count)?;
    let mut out = Matrix::zeros(count, d);
    for i in 0..count {
        let ur = u.row(i);
        let row = out.row_mut(i);
        for k in 0..d.div_ceil(2) {
            let (z1, z2) = box_muller(ur[2 * k], ur[2 * k + 1]);
            row[2 * k] = mean[2 * k] + scale_diag[2 * k] * z1;
            if 2 * k + 1 < d {
                row[2 * k + 1] = mean[2 * k + 1] + scale_diag[2 * k + 1] * z2;
            }
        }
    }
    Ok(out)
}

/// Standard normal draws of dimension `d` from a freshly scrambled stream.
pub fn standard_normals(seed: u64, count: usize, d: usize) -> Result<Matrix> {
    let mut stream = SobolStream::scrambled(uniform_dims(d), seed)?;
    let zeros = alloc::vec![0.0; d];
    let ones = alloc::vec![1.0; d];
    gaussian_qmc(&mut stream, count, &zeros, &ones)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::normal;
    use alloc::vec::Vec;

    #[test]
    fn box_muller_examples() {
        let (z1, _) = box_muller(libm::exp(-0.5), 0.0);
        assert!((z1 - 1.0).abs() < 1e-15);
        let (z1, z2) = box_muller(0.3, 0.25);
        assert!(z1.abs() < 1e-15);
        assert!((z2 - libm::sqrt(-2.0 * libm::log(0.3))).abs() < 1e-15);
    }

    #[test]
    fn tail_frequency() {
        let z = standard_normals(42, 1 << 16, 1).unwrap();
        let hits = z.as_slice().iter().filter(|&&v| v >= 3.0).count() as f64 / 65536.0;
        let p = 1.349898e-3;
        assert!((hits - p).abs() / p < 0.1, "{hits}");
    }

    #[test]
    fn kolmogorov_smirnov() {
        let z = standard_normals(3, 1 << 16, 2).unwrap();
        for d in 0..2 {
            let mut v: Vec<f64> = z.iter_rows().map(|r| r[d]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len() as f64;
            let stat = v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = normal::cdf(x);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            // Critical value at significance 0.001: 1.9495 / sqrt(n).
            assert!(stat < 1.9495 / libm::sqrt(n), "dim {d}: D = {stat}");
        }
    }

    #[test]
    fn rejects_bad_scale() {
        let mut s = SobolStream::scrambled(2, 1).unwrap();
        assert!(gaussian_qmc(&mut s, 4, &[0.0], &[0.0]).is_err());
        assert!(gaussian_qmc(&mut s, 4, &[0.0], &[-1.0]).is_err());
        let mut s1 = SobolStream::scrambled(1, 1).unwrap();
        assert!(gaussian_qmc(&mut s1, 4, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn odd_dimension_uses_pairs() {
        let z = gaussian_qmc(&mut SobolStream::scrambled(4, 5).unwrap(), 8, &[1.0, 2.0, 3.0], &[1.0, 1.0, 2.0])
            .unwrap();
        assert_eq!(z.cols(), 3);
    }
}
