//! Periodic linear regression of total snow-covered area, optionally with a
//! mean shift at a known week.
//!
//! Each week of the year `ν` gets its own intercept and slope on the global
//! week index `t = nT + ν`:
//!
//! ```text
//! G_t = μ_ν + β_ν t + Δ·1[t ≥ c] + ε_t
//! ```
//!
//! Without the shift the fit decouples into `T` simple regressions. With it,
//! `Δ` is shared across weeks and the `2T + 1` coefficients are estimated
//! jointly through a QR decomposition of the design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::SeasonShape;
use crate::error::{Error, Result};
use crate::series::BinarySeries;
use crate::stats::two_sided_p;

/// Weekly aggregate area, million km².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyAreaSeries {
    values: Vec<f64>,
    shape: SeasonShape,
}

impl WeeklyAreaSeries {
    pub fn new(values: Vec<f64>, period: usize) -> Result<Self> {
        let shape = SeasonShape::from_num_weeks(period, values.len())?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidSeries(format!(
                "area at week {} must be finite and nonnegative, got {v}",
                i + 1
            )));
        }
        Ok(Self { values, shape })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> SeasonShape {
        self.shape
    }

    pub fn period(&self) -> usize {
        self.shape.period()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `G_t = Σ_i area_i X_t^i`.
pub fn total_area<'a, I>(grids: I) -> Result<WeeklyAreaSeries>
where
    I: IntoIterator<Item = (&'a BinarySeries, f64)>,
{
    let mut shape: Option<SeasonShape> = None;
    let mut total: Vec<f64> = Vec::new();
    for (series, area) in grids {
        if !(area.is_finite() && area >= 0.0) {
            return Err(Error::InvalidArgument(format!("grid area must be nonnegative, got {area}")));
        }
        match shape {
            None => {
                shape = Some(series.shape());
                total = vec![0.0; series.len()];
            }
            Some(s) if s != series.shape() => {
                return Err(Error::InvalidArgument(format!(
                    "series shapes differ: {}x{} vs {}x{}",
                    s.num_years(),
                    s.period(),
                    series.num_years(),
                    series.period()
                )));
            }
            Some(_) => {}
        }
        for (g, &x) in total.iter_mut().zip(series.values()) {
            if x == 1 {
                *g += area;
            }
        }
    }
    let shape = shape.ok_or_else(|| Error::InvalidArgument("no grids to aggregate".into()))?;
    WeeklyAreaSeries::new(total, shape.period())
}

/// The common shift and its inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicFit {
    pub period: usize,
    /// Intercept per week of year.
    pub mu: Vec<f64>,
    /// Slope per week of year, area per week index.
    pub beta: Vec<f64>,
    pub delta: Option<ShiftEstimate>,
    pub changepoint_index: Option<usize>,
    pub rss: f64,
    /// Error variance pooled over all weeks.
    pub sigma2: f64,
}

impl PeriodicFit {
    /// Slopes per century: `β_ν · T · 100`.
    pub fn beta_per_century(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b * self.period as f64 * 100.0).collect()
    }

    pub fn fitted(&self, t: usize) -> f64 {
        let nu = (t - 1) % self.period;
        let shift = match (self.delta, self.changepoint_index) {
            (Some(d), Some(c)) if t >= c => d.estimate,
            _ => 0.0,
        };
        self.mu[nu] + self.beta[nu] * t as f64 + shift
    }
}

fn residual_sum(g: &WeeklyAreaSeries, fit: &PeriodicFit) -> f64 {
    g.values
        .iter()
        .enumerate()
        .map(|(i, y)| (y - fit.fitted(i + 1)).powi(2))
        .sum()
}

/// Per-week means of the covariate `t` and of `G`.
fn week_means(g: &WeeklyAreaSeries) -> (Vec<f64>, Vec<f64>) {
    let period = g.period();
    let d = g.shape.num_years() as f64;
    let mut t_bar = vec![0.0; period];
    let mut g_bar = vec![0.0; period];
    for (i, y) in g.values.iter().enumerate() {
        t_bar[i % period] += (i + 1) as f64;
        g_bar[i % period] += y;
    }
    for nu in 0..period {
        t_bar[nu] /= d;
        g_bar[nu] /= d;
    }
    (t_bar, g_bar)
}

/// Independent simple regressions, one per week of the year.
pub fn fit_periodic(g: &WeeklyAreaSeries) -> Result<PeriodicFit> {
    let d = g.shape.num_years();
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "periodic regression needs at least 2 years, got {d}"
        )));
    }
    let period = g.period();
    let (t_bar, g_bar) = week_means(g);
    let mut sxy = vec![0.0; period];
    for (i, y) in g.values.iter().enumerate() {
        let nu = i % period;
        sxy[nu] += ((i + 1) as f64 - t_bar[nu]) * (y - g_bar[nu]);
    }
    // Within a week the covariate steps by T, so Σ(t - t̄)² = T²d(d+1)(d-1)/12.
    let df = d as f64;
    let sxx = (period * period) as f64 * df * (df + 1.0) * (df - 1.0) / 12.0;
    let beta: Vec<f64> = sxy.iter().map(|s| s / sxx).collect();
    let mu: Vec<f64> = (0..period).map(|nu| g_bar[nu] - beta[nu] * t_bar[nu]).collect();
    let mut fit = PeriodicFit {
        period,
        mu,
        beta,
        delta: None,
        changepoint_index: None,
        rss: 0.0,
        sigma2: 0.0,
    };
    fit.rss = residual_sum(g, &fit);
    fit.sigma2 = fit.rss / (g.len() - 2 * period) as f64;
    Ok(fit)
}

/// Joint fit with a common shift `Δ` for all weeks from `changepoint` on.
pub fn fit_periodic_with_changepoint(g: &WeeklyAreaSeries, changepoint: usize) -> Result<PeriodicFit> {
    let n = g.len();
    let period = g.period();
    let d = g.shape.num_years();
    if changepoint < 2 || changepoint > n {
        return Err(Error::InvalidArgument(format!(
            "changepoint week {changepoint} outside 2..={n}"
        )));
    }
    if d < 3 || changepoint < period + 1 || changepoint > n - period {
        return Err(Error::RankDeficient(format!(
            "shift at week {changepoint} is confounded with the weekly trends; \
             it must lie in {}..={} with at least 3 years",
            period + 1,
            n.saturating_sub(period)
        )));
    }

    // Columns: T week indicators, T centered week slopes, the shift indicator.
    let (t_bar, _) = week_means(g);
    let cols = 2 * period + 1;
    let mut x = DMatrix::<f64>::zeros(n, cols);
    for i in 0..n {
        let t = i + 1;
        let nu = i % period;
        x[(i, nu)] = 1.0;
        x[(i, period + nu)] = t as f64 - t_bar[nu];
        x[(i, 2 * period)] = if t >= changepoint { 1.0 } else { 0.0 };
    }
    let y = DVector::from_column_slice(&g.values);
    let qr = x.qr();
    let r = qr.r();
    let scale = (0..cols).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    let r_last = r[(cols - 1, cols - 1)];
    if r_last.abs() <= 1e-10 * scale {
        return Err(Error::RankDeficient(format!(
            "shift at week {changepoint} is not identifiable"
        )));
    }
    let qty = qr.q().transpose() * &y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;

    let beta: Vec<f64> = (0..period).map(|nu| coef[period + nu]).collect();
    let mu: Vec<f64> = (0..period).map(|nu| coef[nu] - beta[nu] * t_bar[nu]).collect();
    let delta = coef[2 * period];
    let mut fit = PeriodicFit {
        period,
        mu,
        beta,
        delta: Some(ShiftEstimate {
            estimate: delta,
            std_error: f64::NAN,
            z: f64::NAN,
            p_two_sided: f64::NAN,
        }),
        changepoint_index: Some(changepoint),
        rss: 0.0,
        sigma2: 0.0,
    };
    fit.rss = residual_sum(g, &fit);
    fit.sigma2 = fit.rss / (n - cols) as f64;
    // The shift is the last column, so its variance factor is 1/R_last².
    let se = fit.sigma2.sqrt() / r_last.abs();
    let z = delta / se;
    fit.delta = Some(ShiftEstimate {
        estimate: delta,
        std_error: se,
        z,
        p_two_sided: two_sided_p(z),
    });
    Ok(fit)
}
