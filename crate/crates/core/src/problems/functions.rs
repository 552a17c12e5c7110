//! Closed-form benchmark functions.

use core::f64::consts::{E, PI};

pub fn branin(y: &[f64]) -> f64 {
    let (x1, x2) = (y[0], y[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let a = x2 - b * x1 * x1 + c * x1 - 6.0;
    a * a + 10.0 * (1.0 - t) * libm::cos(x1) + 10.0
}

pub fn six_hump_camel(y: &[f64]) -> f64 {
    let (x1, x2) = (y[0], y[1]);
    let x1s = x1 * x1;
    (4.0 - 2.1 * x1s + x1s * x1s / 3.0) * x1s + x1 * x2 + 4.0 * (x2 * x2 - 1.0) * x2 * x2
}

pub fn ackley(y: &[f64]) -> f64 {
    let d = y.len() as f64;
    let sq: f64 = y.iter().map(|v| v * v).sum();
    let cs: f64 = y.iter().map(|v| libm::cos(2.0 * PI * v)).sum();
    -20.0 * libm::exp(-0.2 * libm::sqrt(sq / d)) - libm::exp(cs / d) + 20.0 + E
}

pub fn quadratic(y: &[f64]) -> f64 {
    y.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
}

pub fn styblinski_tang(y: &[f64]) -> f64 {
    0.5 * y.iter().map(|v| v * v * v * v - 16.0 * v * v + 5.0 * v).sum::<f64>()
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

pub fn hartmann6(y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let mut inner = 0.0;
        for j in 0..6 {
            let d = y[j] - HARTMANN_P[i][j];
            inner += HARTMANN_A[i][j] * d * d;
        }
        s += HARTMANN_ALPHA[i] * libm::exp(-inner);
    }
    -s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((branin(&[PI, 2.275]) - 0.397_887_357_729_738_16).abs() < 1e-12);
        assert!((branin(&[-PI, 12.275]) - 0.397_887_357_729_738_16).abs() < 1e-12);
        assert_eq!(quadratic(&[0.3, 0.3]), 0.0);
        assert!((styblinski_tang(&[-2.903534, -2.903534]) - (-78.332_331_407_542_8)).abs() < 1e-9);
        assert!(ackley(&[0.0, 0.0]).abs() < 1e-14);
        assert!((six_hump_camel(&[0.0898, -0.7126]) - (-1.031_628_453)).abs() < 1e-6);
        let h = hartmann6(&[0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]);
        assert!((h - (-3.32237)).abs() < 1e-4, "{h}");
    }
}
