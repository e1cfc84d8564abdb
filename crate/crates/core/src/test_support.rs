//! Independent reference computations shared by unit tests.

use crate::chain::ThetaParams;

pub(crate) fn model_i() -> ThetaParams {
    ThetaParams::from_array([0.0, 30.0, 25.0, 0.0, 0.0, 30.0, 0.0, 0.0])
}

/// `P(X_t = to | X_{t-1} = from)` straight from the model definition.
pub(crate) fn naive_prob(theta: &ThetaParams, t: usize, period: usize, from: u8, to: u8) -> f64 {
    let tf = t as f64;
    let w = 2.0 * std::f64::consts::PI / period as f64;
    let m = theta.a0 + theta.a1 * (w * (tf - theta.kappa)).cos() + theta.alpha * tf;
    let ms = theta.a0s + theta.a1s * (w * (tf - theta.kappas)).cos() + theta.alphas * tf;
    let p01 = 1.0 / (1.0 + (-m).exp());
    let p10 = 1.0 / (1.0 + (-ms).exp());
    match (from, to) {
        (0, 0) => 1.0 - p01,
        (0, 1) => p01,
        (1, 0) => p10,
        (1, 1) => 1.0 - p10,
        _ => panic!("states are 0 or 1"),
    }
}

/// Every path of length `n` starting bare, with its probability.
pub(crate) fn enumerate_paths(theta: &ThetaParams, n: usize, period: usize) -> Vec<(Vec<u8>, f64)> {
    assert!((1..=20).contains(&n));
    (0..1u32 << (n - 1))
        .map(|bits| {
            let mut x = vec![0u8];
            x.extend((0..n - 1).map(|i| ((bits >> i) & 1) as u8));
            let p = (2..=n)
                .map(|t| naive_prob(theta, t, period, x[t - 2], x[t - 1]))
                .product();
            (x, p)
        })
        .collect()
}

/// A moderately seasonal chain resembling a mid-latitude plains grid.
pub(crate) fn plains() -> ThetaParams {
    ThetaParams::from_array([-3.2, 4.15, 24.35, 0.0, 1.73, 3.79, 49.84, -5e-4])
}
