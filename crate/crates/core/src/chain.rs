//! The periodic nonhomogeneous two-state chain.
//!
//! State 0 is bare ground and state 1 is snow cover. The chain moves from
//! week `t - 1` to week `t` with
//!
//! ```text
//! p01(t) = logistic(m_t),   m_t  = a0  + a1  cos(2π(t - κ)/T)  + α t
//! p10(t) = logistic(m*_t),  m*_t = a0* + a1* cos(2π(t - κ*)/T) + α* t
//! ```
//!
//! Weeks are 1-based and global: week `ν` of year `n` is `t = (n - 1)T + ν`.
//! The chain starts on bare ground, `π(1) = (1, 0)`.

use std::f64::consts::PI;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weeks per winter-centered year in the weekly snow record.
pub const DEFAULT_PERIOD: usize = 52;

const PROB_CEILING: f64 = 1.0 - f64::EPSILON / 2.0;

/// Level, amplitude, phase and drift of one link argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub level: f64,
    pub amplitude: f64,
    /// Week at which the cosine peaks; only meaningful modulo the period.
    pub phase: f64,
    /// Per-week drift of the link argument.
    pub drift: f64,
}

impl LinkParams {
    pub fn new(level: f64, amplitude: f64, phase: f64, drift: f64) -> Self {
        Self {
            level,
            amplitude,
            phase,
            drift,
        }
    }

    /// The link argument at global week `t`.
    ///
    /// The cosine angle is built from `t mod T` and the phase reduced into
    /// `[0, T)`, so the seasonal part is exactly periodic in `t`.
    pub fn argument(&self, t: usize, period: usize) -> f64 {
        let period_f = period as f64;
        let phase = self.phase.rem_euclid(period_f);
        let offset = (t % period) as f64 - phase;
        let angle = 2.0 * PI * offset / period_f;
        self.level + self.amplitude * angle.cos() + self.drift * t as f64
    }
}

/// The eight parameters governing both transition probabilities.
///
/// Unstarred fields drive bare-to-snow onsets (`p01`), starred fields
/// (suffix `s`) drive snow-to-bare melts (`p10`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub a0: f64,
    pub a1: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub a0s: f64,
    pub a1s: f64,
    pub kappas: f64,
    pub alphas: f64,
}

impl ThetaParams {
    pub const NAMES: [&'static str; 8] = [
        "a0", "a1", "kappa", "alpha", "a0s", "a1s", "kappas", "alphas",
    ];

    /// Positions of the two phases in [`ThetaParams::NAMES`] order.
    pub const PHASE_INDICES: [usize; 2] = [2, 6];

    pub fn from_links(onset: LinkParams, melt: LinkParams) -> Self {
        Self {
            a0: onset.level,
            a1: onset.amplitude,
            kappa: onset.phase,
            alpha: onset.drift,
            a0s: melt.level,
            a1s: melt.amplitude,
            kappas: melt.phase,
            alphas: melt.drift,
        }
    }

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            a0: v[0],
            a1: v[1],
            kappa: v[2],
            alpha: v[3],
            a0s: v[4],
            a1s: v[5],
            kappas: v[6],
            alphas: v[7],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.a0,
            self.a1,
            self.kappa,
            self.alpha,
            self.a0s,
            self.a1s,
            self.kappas,
            self.alphas,
        ]
    }

    /// Parameters of the bare-to-snow link `m_t`.
    pub fn onset(&self) -> LinkParams {
        LinkParams::new(self.a0, self.a1, self.kappa, self.alpha)
    }

    /// Parameters of the snow-to-bare link `m*_t`.
    pub fn melt(&self) -> LinkParams {
        LinkParams::new(self.a0s, self.a1s, self.kappas, self.alphas)
    }

    /// Same parameters with both drifts replaced.
    pub fn with_trends(mut self, alpha: f64, alphas: f64) -> Self {
        self.alpha = alpha;
        self.alphas = alphas;
        self
    }

    /// Phases reduced into `[0, period)`.
    pub fn canonical(mut self, period: usize) -> Self {
        self.kappa = self.kappa.rem_euclid(period as f64);
        self.kappas = self.kappas.rem_euclid(period as f64);
        self
    }

    /// Checks finiteness and the positive-amplitude identifiability constraint.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.to_array().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "theta.{} is not finite",
                Self::NAMES[i]
            )));
        }
        if self.a1 <= 0.0 || self.a1s <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "amplitudes must be positive (a1 = {}, a1s = {})",
                self.a1, self.a1s
            )));
        }
        Ok(())
    }
}

/// Period and length of a weekly series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonShape {
    period: usize,
    num_years: usize,
}

impl SeasonShape {
    pub fn new(period: usize, num_years: usize) -> Result<Self> {
        if period < 2 {
            return Err(Error::InvalidArgument(format!(
                "period must be at least 2, got {period}"
            )));
        }
        if num_years < 1 {
            return Err(Error::InvalidArgument("need at least one year".into()));
        }
        Ok(Self { period, num_years })
    }

    /// Shape for `num_weeks` observations, which must be a whole number of years.
    pub fn from_num_weeks(period: usize, num_weeks: usize) -> Result<Self> {
        if period < 2 {
            return Err(Error::InvalidArgument(format!(
                "period must be at least 2, got {period}"
            )));
        }
        if num_weeks == 0 || !num_weeks.is_multiple_of(period) {
            return Err(Error::InvalidArgument(format!(
                "series length {num_weeks} is not a positive multiple of the period {period}"
            )));
        }
        Self::new(period, num_weeks / period)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn num_years(&self) -> usize {
        self.num_years
    }

    pub fn num_weeks(&self) -> usize {
        self.period * self.num_years
    }

    /// Global 1-based week index of week `week` (1-based) in year `year` (1-based).
    pub fn week_index(&self, year: usize, week: usize) -> usize {
        (year - 1) * self.period + week
    }

    /// Year and week-of-year of global week `t`.
    pub fn year_and_week(&self, t: usize) -> (usize, usize) {
        ((t - 1) / self.period + 1, (t - 1) % self.period + 1)
    }
}

/// `1 / (1 + exp(-m))` without overflow, kept strictly inside `(0, 1)`
/// for `|m| <= 700`.
pub fn logistic(m: f64) -> f64 {
    if m >= 0.0 {
        let e = (-m).exp();
        (1.0 - e / (1.0 + e)).min(PROB_CEILING)
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `ln(logistic(m))`, finite for every finite `m`.
pub fn log_logistic(m: f64) -> f64 {
    -softplus(-m)
}

/// `ln(1 + exp(x))`.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Link arguments `(m_t, m*_t)` at global week `t`.
pub fn link_arguments(theta: &ThetaParams, t: usize, period: usize) -> (f64, f64) {
    (
        theta.onset().argument(t, period),
        theta.melt().argument(t, period),
    )
}

/// Transition probabilities `(p01(t), p10(t))` into week `t`.
pub fn transition_probs(theta: &ThetaParams, t: usize, period: usize) -> (f64, f64) {
    let (m, ms) = link_arguments(theta, t, period);
    (logistic(m), logistic(ms))
}

/// A 2×2 row-stochastic matrix indexed `[from][to]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    pub p: [[f64; 2]; 2],
}

impl TransitionMatrix {
    pub fn identity() -> Self {
        Self {
            p: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn from_probs(p01: f64, p10: f64) -> Self {
        Self {
            p: [[1.0 - p01, p01], [p10, 1.0 - p10]],
        }
    }

    pub fn p00(&self) -> f64 {
        self.p[0][0]
    }

    pub fn p01(&self) -> f64 {
        self.p[0][1]
    }

    pub fn p10(&self) -> f64 {
        self.p[1][0]
    }

    pub fn p11(&self) -> f64 {
        self.p[1][1]
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            v[0] * self.p[0][0] + v[1] * self.p[1][0],
            v[0] * self.p[0][1] + v[1] * self.p[1][1],
        ]
    }

    /// Matrix times column vector.
    pub fn right_apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.p[0][0] * v[0] + self.p[0][1] * v[1],
            self.p[1][0] * v[0] + self.p[1][1] * v[1],
        ]
    }
}

impl Mul for TransitionMatrix {
    type Output = TransitionMatrix;

    fn mul(self, rhs: TransitionMatrix) -> TransitionMatrix {
        let a = &self.p;
        let b = &rhs.p;
        let mut p = [[0.0; 2]; 2];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        TransitionMatrix { p }
    }
}

/// One-step matrix `P(t)` from week `t - 1` to week `t`.
pub fn transition_matrix(theta: &ThetaParams, t: usize, period: usize) -> TransitionMatrix {
    let (p01, p10) = transition_probs(theta, t, period);
    TransitionMatrix::from_probs(p01, p10)
}

/// Marginal distribution of the state at one week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalDist {
    /// Probability of bare ground.
    pub bare: f64,
    /// Probability of snow cover.
    pub snow: f64,
}

impl MarginalDist {
    pub const START: MarginalDist = MarginalDist {
        bare: 1.0,
        snow: 0.0,
    };

    fn as_row(&self) -> [f64; 2] {
        [self.bare, self.snow]
    }

    fn from_row(v: [f64; 2]) -> Self {
        Self {
            bare: v[0],
            snow: v[1],
        }
    }
}

/// Marginal distribution at week `t` from the bare-ground start.
///
/// # Panics
///
/// Panics if `t == 0`.
pub fn marginal(theta: &ThetaParams, t: usize, period: usize) -> MarginalDist {
    assert!(t >= 1, "weeks are 1-based");
    let mut pi = MarginalDist::START.as_row();
    for k in 2..=t {
        pi = transition_matrix(theta, k, period).left_apply(pi);
    }
    MarginalDist::from_row(pi)
}

/// Marginals for weeks `1..=num_weeks`; entry `t - 1` holds `π(t)`.
pub fn marginal_table(theta: &ThetaParams, num_weeks: usize, period: usize) -> Vec<MarginalDist> {
    let mut out = Vec::with_capacity(num_weeks);
    let mut pi = MarginalDist::START.as_row();
    for t in 1..=num_weeks {
        if t > 1 {
            pi = transition_matrix(theta, t, period).left_apply(pi);
        }
        out.push(MarginalDist::from_row(pi));
    }
    out
}

/// `P*(t1, t2) = P(t1 + 1) ⋯ P(t2)`, the transition matrix from week `t1` to week `t2`.
pub fn multi_step_matrix(
    theta: &ThetaParams,
    t1: usize,
    t2: usize,
    period: usize,
) -> Result<TransitionMatrix> {
    if t1 >= t2 {
        return Err(Error::InvalidArgument(format!(
            "multi-step matrix needs t1 < t2, got t1 = {t1}, t2 = {t2}"
        )));
    }
    Ok(((t1 + 1)..=t2).fold(TransitionMatrix::identity(), |acc, t| {
        acc * transition_matrix(theta, t, period)
    }))
}
