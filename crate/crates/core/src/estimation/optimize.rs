//! Maximizers for one link's share of the log-likelihood.
//!
//! Two independent routes are provided:
//!
//! * [`newton`] works in harmonic coordinates. Writing
//!   `a1 cos(ω(τ - κ)) = b cos(ωτ) + c sin(ωτ)` makes the link argument linear
//!   in `(a0, b, c, α)`, so the piece is a logistic regression whose
//!   log-likelihood is concave. Newton–Raphson with step halving and exact
//!   derivatives converges quadratically.
//! * [`quasi_newton`] is BFGS ascent in the natural coordinates
//!   `(a0, ln a1, κ, α)` with central-difference gradients.
//!
//! Both scale the drift by the series length so every coordinate is O(1).

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};

use super::likelihood::{half_loglik, Transitions};
use crate::chain::{log_logistic, logistic, LinkParams};

#[derive(Debug, Clone)]
pub(crate) struct HalfFit {
    pub link: LinkParams,
    pub loglik: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Pre-tabulated design for the harmonic parameterization.
struct HarmonicDesign<'a> {
    tr: &'a Transitions,
    rows: Vec<[f64; 4]>,
}

impl<'a> HarmonicDesign<'a> {
    fn new(tr: &'a Transitions, time_scale: f64) -> Self {
        let omega = 2.0 * PI / tr.period as f64;
        let rows = tr
            .weeks
            .iter()
            .map(|&t| {
                let (sin, cos) = (omega * (t % tr.period) as f64).sin_cos();
                [1.0, cos, sin, t as f64 / time_scale]
            })
            .collect();
        Self { tr, rows }
    }

    fn loglik(&self, v: &Vector4<f64>) -> f64 {
        self.rows
            .iter()
            .zip(&self.tr.moved)
            .map(|(x, &moved)| {
                let m = x[0] * v[0] + x[1] * v[1] + x[2] * v[2] + x[3] * v[3];
                if moved {
                    log_logistic(m)
                } else {
                    log_logistic(-m)
                }
            })
            .sum()
    }

    /// Gradient and negative Hessian at `v`.
    fn derivatives(&self, v: &Vector4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let mut g = Vector4::zeros();
        let mut info = Matrix4::zeros();
        for (x, &moved) in self.rows.iter().zip(&self.tr.moved) {
            let x = Vector4::from_row_slice(x);
            let p = logistic(x.dot(v));
            let resid = if moved { 1.0 } else { 0.0 } - p;
            g += x * resid;
            info += x * x.transpose() * (p * (1.0 - p));
        }
        (g, info)
    }
}

fn to_harmonic(link: &LinkParams, period: usize, time_scale: f64) -> Vector4<f64> {
    let angle = 2.0 * PI * link.phase / period as f64;
    Vector4::new(
        link.level,
        link.amplitude * angle.cos(),
        link.amplitude * angle.sin(),
        link.drift * time_scale,
    )
}

fn from_harmonic(v: &Vector4<f64>, period: usize, time_scale: f64) -> LinkParams {
    let amplitude = v[1].hypot(v[2]);
    let phase = (v[2].atan2(v[1]) * period as f64 / (2.0 * PI)).rem_euclid(period as f64);
    LinkParams::new(v[0], amplitude, phase, v[3] / time_scale)
}

/// Solves `info * x = g`, adding a growing ridge when `info` is not
/// numerically positive definite.
fn solve_spd(info: &Matrix4<f64>, g: &Vector4<f64>) -> Option<Vector4<f64>> {
    let scale = info.diagonal().max().max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let regularized = info + Matrix4::identity() * ridge;
        if let Some(chol) = regularized.cholesky() {
            let x = chol.solve(g);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        ridge = if ridge == 0.0 { scale * 1e-12 } else { ridge * 100.0 };
    }
    None
}

pub(crate) fn newton(
    tr: &Transitions,
    start: &LinkParams,
    time_scale: f64,
    max_iterations: usize,
    tolerance: f64,
) -> HalfFit {
    let period = tr.period;
    let design = HarmonicDesign::new(tr, time_scale);
    let mut v = to_harmonic(start, period, time_scale);
    let mut ll = design.loglik(&v);
    let mut iterations = 0;
    let (mut g, mut info) = design.derivatives(&v);
    let mut converged = g.norm() <= tolerance;

    while !converged && iterations < max_iterations {
        iterations += 1;
        let Some(step) = solve_spd(&info, &g) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = v + step * scale;
            let cand_ll = design.loglik(&candidate);
            if cand_ll.is_finite() && cand_ll >= ll {
                v = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        (g, info) = design.derivatives(&v);
        converged = g.norm() <= tolerance;
        if !accepted {
            break;
        }
    }

    let link = from_harmonic(&v, period, time_scale);
    HalfFit {
        link,
        loglik: half_loglik(&link, tr),
        gradient_norm: g.norm(),
        iterations,
        converged,
    }
}

/// Natural coordinates `(a0, ln a1, κ, α·scale)`.
fn to_natural(link: &LinkParams, time_scale: f64) -> [f64; 4] {
    [
        link.level,
        link.amplitude.ln(),
        link.phase,
        link.drift * time_scale,
    ]
}

fn from_natural(u: &[f64; 4], time_scale: f64) -> LinkParams {
    LinkParams::new(u[0], u[1].exp(), u[2], u[3] / time_scale)
}

fn central_gradient(f: &impl Fn(&[f64; 4]) -> f64, u: &[f64; 4]) -> [f64; 4] {
    let mut g = [0.0; 4];
    for k in 0..4 {
        let h = 1e-6 * u[k].abs().max(1.0);
        let mut up = *u;
        let mut down = *u;
        up[k] += h;
        down[k] -= h;
        g[k] = (f(&up) - f(&down)) / (2.0 * h);
    }
    g
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn quasi_newton(
    tr: &Transitions,
    start: &LinkParams,
    time_scale: f64,
    max_iterations: usize,
    tolerance: f64,
) -> HalfFit {
    // Minimize the negative log-likelihood.
    let objective = |u: &[f64; 4]| -half_loglik(&from_natural(u, time_scale), tr);
    let mut u = to_natural(start, time_scale);
    let mut f = objective(&u);
    let mut g = central_gradient(&objective, &u);
    let mut inv_hess = Matrix4::<f64>::identity();
    let mut iterations = 0;
    let mut converged = norm4(&g) <= tolerance;

    while !converged && iterations < max_iterations {
        iterations += 1;
        let gv = Vector4::from_row_slice(&g);
        let mut dir = -(inv_hess * gv);
        let mut slope = dir.dot(&gv);
        if slope >= 0.0 {
            inv_hess = Matrix4::identity();
            dir = -gv;
            slope = dir.dot(&gv);
        }

        let mut step = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let cand: [f64; 4] = std::array::from_fn(|k| u[k] + step * dir[k]);
            let fc = objective(&cand);
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                next = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((u_new, f_new)) = next else {
            break;
        };
        let g_new = central_gradient(&objective, &u_new);

        let s = Vector4::from_fn(|k, _| u_new[k] - u[k]);
        let y = Vector4::from_fn(|k, _| g_new[k] - g[k]);
        let sy = s.dot(&y);
        if sy > 1e-12 {
            if iterations == 1 {
                inv_hess *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let eye = Matrix4::identity();
            inv_hess = (eye - s * y.transpose() * rho)
                * inv_hess
                * (eye - y * s.transpose() * rho)
                + s * s.transpose() * rho;
        }

        u = u_new;
        f = f_new;
        g = g_new;
        converged = norm4(&g) <= tolerance;
    }

    let mut link = from_natural(&u, time_scale);
    link.phase = link.phase.rem_euclid(tr.period as f64);
    HalfFit {
        link,
        loglik: -f,
        gradient_norm: norm4(&g),
        iterations,
        converged,
    }
}
