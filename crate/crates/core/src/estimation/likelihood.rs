//! Log-likelihood of the chain and its exact derivatives.
//!
//! The likelihood splits into two independent pieces: transitions out of
//! bare ground depend only on the onset link, transitions out of snow only
//! on the melt link. Each piece is a Bernoulli likelihood in "did the state
//! change" with success probability `logistic(m_t)`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, SMatrix};

use crate::chain::{log_logistic, logistic, LinkParams, ThetaParams};
use crate::error::{Error, Result};
use crate::series::BinarySeries;

/// Transitions out of one state.
#[derive(Debug, Clone)]
pub(crate) struct Transitions {
    /// Week the transition lands on (`t`, with the source state at `t - 1`).
    pub weeks: Vec<usize>,
    /// Whether the state changed.
    pub moved: Vec<bool>,
    pub period: usize,
}

impl Transitions {
    pub fn from_state(series: &BinarySeries, from: u8) -> Self {
        let values = series.values();
        let mut weeks = Vec::new();
        let mut moved = Vec::new();
        for t in 2..=values.len() {
            if values[t - 2] == from {
                weeks.push(t);
                moved.push(values[t - 1] != from);
            }
        }
        Self {
            weeks,
            moved,
            period: series.period(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.weeks.iter().copied().zip(self.moved.iter().copied())
    }
}

pub(crate) fn half_loglik(link: &LinkParams, tr: &Transitions) -> f64 {
    tr.iter()
        .map(|(t, moved)| {
            let m = link.argument(t, tr.period);
            if moved {
                log_logistic(m)
            } else {
                log_logistic(-m)
            }
        })
        .sum()
}

/// Partial derivatives of the link argument at week `t` with respect to
/// (level, amplitude, phase, drift), plus the seasonal angle.
fn link_jacobian(link: &LinkParams, t: usize, period: usize) -> ([f64; 4], f64) {
    let omega = 2.0 * PI / period as f64;
    let phase = link.phase.rem_euclid(period as f64);
    let angle = omega * ((t % period) as f64 - phase);
    let (sin, cos) = angle.sin_cos();
    (
        [1.0, cos, link.amplitude * sin * omega, t as f64],
        angle,
    )
}

pub(crate) fn half_gradient(link: &LinkParams, tr: &Transitions) -> [f64; 4] {
    let mut g = [0.0; 4];
    for (t, moved) in tr.iter() {
        let m = link.argument(t, tr.period);
        let resid = if moved { 1.0 } else { 0.0 } - logistic(m);
        let (jac, _) = link_jacobian(link, t, tr.period);
        for k in 0..4 {
            g[k] += resid * jac[k];
        }
    }
    g
}

pub(crate) fn half_hessian(link: &LinkParams, tr: &Transitions) -> [[f64; 4]; 4] {
    let omega = 2.0 * PI / tr.period as f64;
    let mut h = [[0.0; 4]; 4];
    for (t, moved) in tr.iter() {
        let m = link.argument(t, tr.period);
        let p = logistic(m);
        let resid = if moved { 1.0 } else { 0.0 } - p;
        let weight = p * (1.0 - p);
        let (jac, angle) = link_jacobian(link, t, tr.period);
        for i in 0..4 {
            for j in 0..4 {
                h[i][j] -= weight * jac[i] * jac[j];
            }
        }
        // Second derivatives of the link argument live in the amplitude/phase block.
        let d_amp_phase = angle.sin() * omega;
        let d_phase_phase = -link.amplitude * angle.cos() * omega * omega;
        h[1][2] += resid * d_amp_phase;
        h[2][1] += resid * d_amp_phase;
        h[2][2] += resid * d_phase_phase;
    }
    h
}

/// ln L(Θ | X) summed over weeks `2..=N`.
pub fn log_likelihood(theta: &ThetaParams, series: &BinarySeries) -> f64 {
    half_loglik(&theta.onset(), &Transitions::from_state(series, 0))
        + half_loglik(&theta.melt(), &Transitions::from_state(series, 1))
}

/// Exact gradient of the log-likelihood in the order of [`ThetaParams::NAMES`].
pub fn log_likelihood_gradient(theta: &ThetaParams, series: &BinarySeries) -> [f64; 8] {
    let on = half_gradient(&theta.onset(), &Transitions::from_state(series, 0));
    let off = half_gradient(&theta.melt(), &Transitions::from_state(series, 1));
    let mut g = [0.0; 8];
    g[..4].copy_from_slice(&on);
    g[4..].copy_from_slice(&off);
    g
}

/// Exact Hessian of the log-likelihood; block diagonal between the two links.
pub fn log_likelihood_hessian(theta: &ThetaParams, series: &BinarySeries) -> [[f64; 8]; 8] {
    let on = half_hessian(&theta.onset(), &Transitions::from_state(series, 0));
    let off = half_hessian(&theta.melt(), &Transitions::from_state(series, 1));
    let mut h = [[0.0; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            h[i][j] = on[i][j];
            h[i + 4][j + 4] = off[i][j];
        }
    }
    h
}

/// Inverse of the observed information (negative Hessian) of one link, if it is
/// positive definite.
pub(crate) fn half_covariance(link: &LinkParams, tr: &Transitions) -> Option<Matrix4<f64>> {
    let h = half_hessian(link, tr);
    let info = Matrix4::from_fn(|i, j| -h[i][j]);
    let chol = info.cholesky()?;
    let cov = chol.inverse();
    cov.iter().all(|v| v.is_finite()).then_some(cov)
}

/// Standard errors from the inverse observed information at `theta_hat`.
pub fn standard_errors(theta_hat: &ThetaParams, series: &BinarySeries) -> Result<[f64; 8]> {
    let on = half_covariance(&theta_hat.onset(), &Transitions::from_state(series, 0))
        .ok_or(Error::SingularInformation)?;
    let off = half_covariance(&theta_hat.melt(), &Transitions::from_state(series, 1))
        .ok_or(Error::SingularInformation)?;
    let mut se = [0.0; 8];
    for k in 0..4 {
        se[k] = on[(k, k)].sqrt();
        se[k + 4] = off[(k, k)].sqrt();
    }
    Ok(se)
}

/// Full 8×8 estimator covariance, block diagonal.
pub fn covariance_matrix(theta_hat: &ThetaParams, series: &BinarySeries) -> Result<SMatrix<f64, 8, 8>> {
    let on = half_covariance(&theta_hat.onset(), &Transitions::from_state(series, 0))
        .ok_or(Error::SingularInformation)?;
    let off = half_covariance(&theta_hat.melt(), &Transitions::from_state(series, 1))
        .ok_or(Error::SingularInformation)?;
    let mut cov = SMatrix::<f64, 8, 8>::zeros();
    cov.fixed_view_mut::<4, 4>(0, 0).copy_from(&on);
    cov.fixed_view_mut::<4, 4>(4, 4).copy_from(&off);
    Ok(cov)
}
