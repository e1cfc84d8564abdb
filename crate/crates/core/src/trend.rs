//! Annual snow-week counts, their least-squares trend, and the exact
//! variance of that trend under the fitted chain.
//!
//! With `S_n` the number of snow weeks in year `n`,
//!
//! ```text
//! β̂ = Σ_k S_k (k - k̄) / Q,  k̄ = (d + 1)/2,  Q = d(d + 1)(d - 1)/12
//! Var(β̂) = Σ_k Σ_l (k - k̄)(l - k̄) Cov(S_k, S_l) / Q²
//! ```
//!
//! The covariances come from the chain's marginals and multi-step transition
//! probabilities:
//!
//! ```text
//! E[S_n]          = Σ_u π₁(t_u)
//! E[S_n S_{n+h}]  = Σ_u Σ_v π₁(t_u) P*(t_u, t_v)[snow, snow]          (h > 0)
//! E[S_n²]         = Σ_u π₁(t_u) + 2 Σ_{u<v} π₁(t_u) P*(t_u, t_v)[snow, snow]
//! ```
//!
//! with `t_u = (n-1)T + u` and `t_v = (n+h-1)T + v`. [`SnowWeekMoments`]
//! evaluates all of them in `O(N + d²)` by accumulating row vectors through
//! each year and chaining whole-year transition matrices between years.

use serde::{Deserialize, Serialize};

use crate::chain::{marginal_table, transition_matrix, SeasonShape, ThetaParams, TransitionMatrix};
use crate::error::{Error, Result};
use crate::estimation::wald_test;
use crate::series::BinarySeries;

const SNOW: usize = 1;

/// Snow-week count per year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnualCounts {
    pub counts: Vec<u32>,
    pub period: usize,
}

impl AnnualCounts {
    pub fn num_years(&self) -> usize {
        self.counts.len()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

pub fn annual_counts(series: &BinarySeries) -> AnnualCounts {
    AnnualCounts {
        counts: series
            .values()
            .chunks(series.period())
            .map(|year| year.iter().map(|&v| v as u32).sum())
            .collect(),
        period: series.period(),
    }
}

/// Year weights `(k - k̄)/Q` for `k = 1..=d`.
pub fn slope_weights(num_years: usize) -> Result<Vec<f64>> {
    if num_years < 2 {
        return Err(Error::InvalidArgument(format!(
            "a trend needs at least 2 years, got {num_years}"
        )));
    }
    let d = num_years as f64;
    let center = (d + 1.0) / 2.0;
    let q = d * (d + 1.0) * (d - 1.0) / 12.0;
    Ok((1..=num_years).map(|k| (k as f64 - center) / q).collect())
}

/// Least-squares slope of the yearly values on the year index.
pub fn ols_slope(values: &[f64]) -> Result<f64> {
    Ok(slope_weights(values.len())?
        .iter()
        .zip(values)
        .map(|(w, s)| w * s)
        .sum())
}

/// Snow weeks gained per year.
pub fn beta_hat(counts: &AnnualCounts) -> Result<f64> {
    ols_slope(&counts.as_f64())
}

/// Means and covariances of the yearly snow-week counts implied by a chain.
#[derive(Debug, Clone)]
pub struct SnowWeekMoments {
    means: Vec<f64>,
    /// Row-major `d × d`.
    cov: Vec<f64>,
    num_years: usize,
}

impl SnowWeekMoments {
    pub fn new(theta: &ThetaParams, shape: SeasonShape) -> Self {
        let period = shape.period();
        let d = shape.num_years();
        let n = shape.num_weeks();
        let snow_prob: Vec<f64> = marginal_table(theta, n, period).iter().map(|p| p.snow).collect();
        // steps[t - 1] = P(t); P(1) is never used.
        let steps: Vec<TransitionMatrix> = (1..=n).map(|t| transition_matrix(theta, t, period)).collect();

        let mut means = vec![0.0; d];
        let mut second = vec![0.0; d];
        // Σ_u π₁(t_u) e_snow' P*(t_u, end of year), per year.
        let mut carry_out = vec![[0.0; 2]; d];
        // Σ_v P*(start of year - 1, t_v) e_snow, per year (unused for year 1).
        let mut carry_in = vec![[0.0; 2]; d];
        // P*((k-1)T, kT), per year (unused for year 1).
        let mut year_step = vec![TransitionMatrix::identity(); d];

        for k in 0..d {
            let first = k * period + 1;
            let mut acc = [0.0; 2];
            let mut cross = 0.0;
            let mut through = TransitionMatrix::identity();
            let mut col_sum = [0.0; 2];
            for t in first..first + period {
                if t > first {
                    acc = steps[t - 1].left_apply(acc);
                    cross += acc[SNOW];
                }
                acc[SNOW] += snow_prob[t - 1];
                means[k] += snow_prob[t - 1];
                if k > 0 {
                    through = through * steps[t - 1];
                    col_sum[0] += through.p[0][SNOW];
                    col_sum[1] += through.p[1][SNOW];
                }
            }
            second[k] = means[k] + 2.0 * cross;
            carry_out[k] = acc;
            carry_in[k] = col_sum;
            year_step[k] = through;
        }

        let mut cov = vec![0.0; d * d];
        for k in 0..d {
            cov[k * d + k] = second[k] - means[k] * means[k];
            let mut row = carry_out[k];
            for l in (k + 1)..d {
                let joint = row[0] * carry_in[l][0] + row[1] * carry_in[l][1];
                let c = joint - means[k] * means[l];
                cov[k * d + l] = c;
                cov[l * d + k] = c;
                row = year_step[l].left_apply(row);
            }
        }
        Self {
            means,
            cov,
            num_years: d,
        }
    }

    pub fn num_years(&self) -> usize {
        self.num_years
    }

    /// `E[S_n]`, `n` 1-based.
    pub fn mean(&self, n: usize) -> f64 {
        self.means[n - 1]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// `Cov(S_n, S_m)`, both 1-based.
    pub fn cov(&self, n: usize, m: usize) -> f64 {
        self.cov[(n - 1) * self.num_years + (m - 1)]
    }

    /// `Σ_k Σ_l w_k w_l Cov(S_k, S_l)` with the least-squares slope weights.
    pub fn slope_variance(&self) -> Result<f64> {
        let w = slope_weights(self.num_years)?;
        let d = self.num_years;
        let mut total = 0.0;
        for k in 0..d {
            for l in 0..d {
                total += w[k] * w[l] * self.cov[k * d + l];
            }
        }
        Ok(total.max(0.0))
    }
}

fn check_year(n: usize, shape: SeasonShape) -> Result<()> {
    if n < 1 || n > shape.num_years() {
        return Err(Error::InvalidArgument(format!(
            "year {n} outside 1..={}",
            shape.num_years()
        )));
    }
    Ok(())
}

/// `E[S_n]`.
pub fn expected_s(theta: &ThetaParams, n: usize, shape: SeasonShape) -> Result<f64> {
    check_year(n, shape)?;
    let period = shape.period();
    let table = marginal_table(theta, n * period, period);
    Ok(table[(n - 1) * period..].iter().map(|p| p.snow).sum())
}

/// `Cov(S_n, S_{n+h})`.
pub fn cov_s(theta: &ThetaParams, n: usize, h: usize, shape: SeasonShape) -> Result<f64> {
    check_year(n, shape)?;
    check_year(n + h, shape)?;
    let truncated = SeasonShape::new(shape.period(), n + h)?;
    Ok(SnowWeekMoments::new(theta, truncated).cov(n, n + h))
}

/// Variance of the least-squares snow-week trend implied by `theta`.
pub fn var_beta(theta: &ThetaParams, shape: SeasonShape) -> Result<f64> {
    slope_weights(shape.num_years())?;
    SnowWeekMoments::new(theta, shape).slope_variance()
}

/// `z = β̂ / √Var(β̂)` and its two-sided normal p-value.
pub fn trend_test(beta: f64, var: f64) -> Result<(f64, f64)> {
    if var.is_nan() || var <= 0.0 {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {var}")));
    }
    let w = wald_test(beta, var.sqrt())?;
    Ok((w.z, w.p_two_sided))
}

/// `(E[S_n] - E[S_1]) / (n - 1)`.
pub fn model_based_trend(theta: &ThetaParams, n: usize, shape: SeasonShape) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "model-based trend needs n >= 2, got {n}"
        )));
    }
    check_year(n, shape)?;
    let period = shape.period();
    let table = marginal_table(theta, n * period, period);
    let year_sum = |k: usize| -> f64 {
        table[(k - 1) * period..k * period].iter().map(|p| p.snow).sum()
    };
    Ok((year_sum(n) - year_sum(1)) / (n - 1) as f64)
}

/// Trend of a series with its chain-based uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// Snow weeks per year.
    pub beta_hat: f64,
    pub beta_per_century: f64,
    pub var_beta: f64,
    pub std_error: f64,
    pub std_error_per_century: f64,
    /// NaN when the variance is zero.
    pub z: f64,
    pub p_two_sided: f64,
    /// `(E[S_d] - E[S_1])/(d - 1)` in snow weeks per year.
    pub model_based_trend: Option<f64>,
}

/// Trend report for `series` with the variance evaluated at `theta`.
pub fn trend_report(series: &BinarySeries, theta: &ThetaParams) -> Result<TrendReport> {
    let shape = series.shape();
    let beta = beta_hat(&annual_counts(series))?;
    let moments = SnowWeekMoments::new(theta, shape);
    let var = moments.slope_variance()?;
    let (z, p) = trend_test(beta, var).unwrap_or((f64::NAN, f64::NAN));
    let d = shape.num_years();
    let model_trend = (moments.mean(d) - moments.mean(1)) / (d - 1) as f64;
    Ok(TrendReport {
        beta_hat: beta,
        beta_per_century: 100.0 * beta,
        var_beta: var,
        std_error: var.sqrt(),
        std_error_per_century: 100.0 * var.sqrt(),
        z,
        p_two_sided: p,
        model_based_trend: Some(model_trend),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{marginal, multi_step_matrix};
    use crate::simulation::{replication_rng, simulate_with_rng, ModelPreset};
    use crate::test_support::enumerate_paths;
    use proptest::prelude::*;

    fn shape(period: usize, years: usize) -> SeasonShape {
        SeasonShape::new(period, years).unwrap()
    }

    #[test]
    fn counts_per_year() {
        let s = BinarySeries::new(vec![0; 12], 4).unwrap();
        assert_eq!(annual_counts(&s).counts, vec![0, 0, 0]);
        let s = BinarySeries::new(vec![1; 12], 4).unwrap();
        assert_eq!(annual_counts(&s).counts, vec![4, 4, 4]);
        let s = BinarySeries::new(vec![0, 1, 1, 0, 1, 1, 1, 0], 4).unwrap();
        assert_eq!(annual_counts(&s).counts, vec![2, 3]);
    }

    #[test]
    fn slope_by_hand() {
        let counts = AnnualCounts {
            counts: vec![4, 6, 8],
            period: 52,
        };
        assert!((beta_hat(&counts).unwrap() - 2.0).abs() < 1e-15);
        let flat = AnnualCounts {
            counts: vec![7; 9],
            period: 52,
        };
        assert!(beta_hat(&flat).unwrap().abs() < 1e-15);
        assert!(ols_slope(&[1.0]).is_err());
    }

    #[test]
    fn slope_matches_generic_least_squares() {
        let ys = [3.0, 9.0, 4.0, 11.0, 8.0, 15.0, 2.0];
        let n = ys.len() as f64;
        let xs: Vec<f64> = (1..=ys.len()).map(|k| k as f64).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        assert!((ols_slope(&ys).unwrap() - sxy / sxx).abs() < 1e-14);
    }

    /// Appendix formulas evaluated pair by pair with explicit multi-step matrices.
    fn pairwise_cov(theta: &ThetaParams, n: usize, m: usize, period: usize) -> f64 {
        let (n, m) = (n.min(m), n.max(m));
        let weeks = |k: usize| ((k - 1) * period + 1)..=(k * period);
        let pi1 = |t: usize| marginal(theta, t, period).snow;
        let mean = |k: usize| weeks(k).map(pi1).sum::<f64>();
        let mut joint = 0.0;
        for t1 in weeks(n) {
            for t2 in weeks(m) {
                if t2 == t1 {
                    joint += pi1(t1);
                } else if t2 > t1 {
                    let ms = multi_step_matrix(theta, t1, t2, period).unwrap();
                    joint += if n == m { 2.0 } else { 1.0 } * pi1(t1) * ms.p11();
                }
            }
        }
        joint - mean(n) * mean(m)
    }

    #[test]
    fn fast_moments_match_pairwise_formulas() {
        let theta = ThetaParams::from_array([0.4, 2.5, 3.0, 0.01, -0.2, 1.7, 1.0, -0.02]);
        let period = 6;
        let moments = SnowWeekMoments::new(&theta, shape(period, 5));
        for n in 1..=5 {
            for m in 1..=5 {
                let fast = moments.cov(n, m);
                let slow = pairwise_cov(&theta, n, m, period);
                assert!((fast - slow).abs() < 1e-12, "({n},{m}): {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn moments_match_path_enumeration() {
        let theta = ThetaParams::from_array([0.3, 1.1, 1.0, 0.05, 0.2, 0.9, 3.0, -0.04]);
        let sh = shape(4, 2);
        let paths = enumerate_paths(&theta, 8, 4);
        let s = |x: &[u8], k: usize| x[(k - 1) * 4..k * 4].iter().map(|&v| v as f64).sum::<f64>();
        let e = |f: &dyn Fn(&[u8]) -> f64| paths.iter().map(|(x, p)| p * f(x)).sum::<f64>();
        let e1 = e(&|x| s(x, 1));
        let e2 = e(&|x| s(x, 2));
        assert!((expected_s(&theta, 1, sh).unwrap() - e1).abs() < 1e-10);
        assert!((expected_s(&theta, 2, sh).unwrap() - e2).abs() < 1e-10);
        let v1 = e(&|x| s(x, 1).powi(2)) - e1 * e1;
        let c12 = e(&|x| s(x, 1) * s(x, 2)) - e1 * e2;
        assert!((cov_s(&theta, 1, 0, sh).unwrap() - v1).abs() < 1e-10);
        assert!((cov_s(&theta, 1, 1, sh).unwrap() - c12).abs() < 1e-10);
        let vb = e(&|x| (s(x, 2) - s(x, 1)).powi(2)) - (e2 - e1).powi(2);
        assert!((var_beta(&theta, sh).unwrap() - vb).abs() < 1e-10);
    }

    #[test]
    fn deterministic_chain_has_no_variance() {
        // Onset certain in week 2 of each year, melt certain in week 4.
        let theta = ThetaParams::from_array([-60.0, 200.0, 2.0, 0.0, -60.0, 200.0, 0.0, 0.0]);
        let sh = shape(4, 6);
        let moments = SnowWeekMoments::new(&theta, sh);
        for n in 1..=6 {
            for m in 1..=6 {
                assert!(moments.cov(n, m).abs() < 1e-12);
            }
        }
        assert!(var_beta(&theta, sh).unwrap() < 1e-12);
        let never = ThetaParams::from_array([-60.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(expected_s(&never, 3, sh).unwrap() < 1e-20);
    }

    #[test]
    fn variance_is_quadratic_form() {
        let theta = ModelPreset::II.theta().with_trends(2e-4, -1e-4);
        let sh = shape(52, 12);
        let moments = SnowWeekMoments::new(&theta, sh);
        let w = slope_weights(12).unwrap();
        let cw: Vec<f64> = (1..=12)
            .map(|k| (1..=12).map(|l| moments.cov(k, l) * w[l - 1]).sum())
            .collect();
        let quad: f64 = w.iter().zip(&cw).map(|(a, b)| a * b).sum();
        let v = var_beta(&theta, sh).unwrap();
        assert!((v - quad).abs() <= 1e-12 * v.max(1e-300));
    }

    #[test]
    fn range_checks() {
        let theta = ModelPreset::I.theta();
        let sh = shape(52, 3);
        assert!(expected_s(&theta, 0, sh).is_err());
        assert!(expected_s(&theta, 4, sh).is_err());
        assert!(cov_s(&theta, 2, 2, sh).is_err());
        assert!(model_based_trend(&theta, 1, sh).is_err());
        assert!(trend_test(1.0, 0.0).is_err());
        assert!(var_beta(&theta, shape(52, 1)).is_err());
    }

    #[test]
    fn trend_test_values() {
        assert_eq!(trend_test(0.0, 1.0).unwrap(), (0.0, 1.0));
        let (z, p) = trend_test(0.038_613, 0.0247f64.powi(2)).unwrap();
        assert!((z - 1.5633).abs() < 0.002);
        assert!((p - 0.1180).abs() < 0.001);
        let (_, p) = trend_test(2.0, 1.0).unwrap();
        assert!((1.0 - p - 0.9545).abs() < 1e-4);
    }

    #[test]
    fn untrended_model_has_flat_model_trend() {
        let sh = shape(52, 50);
        for n in [2, 10, 50] {
            let trend = model_based_trend(&ModelPreset::I.theta(), n, sh).unwrap();
            assert!(trend.abs() < 1e-8, "n={n}: {trend}");
        }
        let theta = ModelPreset::I.theta().with_trends(1e-3, -1e-3);
        let by_def = expected_s(&theta, 2, sh).unwrap() - expected_s(&theta, 1, sh).unwrap();
        assert!((model_based_trend(&theta, 2, sh).unwrap() - by_def).abs() < 1e-12);
    }

    #[test]
    fn expected_counts_match_monte_carlo() {
        let theta = ModelPreset::III.theta().with_trends(5e-4, -5e-4);
        let sh = shape(52, 3);
        let reps = 100_000;
        let mut sums = [0.0f64; 3];
        let mut squares = [0.0f64; 3];
        for rep in 0..reps {
            let s = simulate_with_rng(&theta, 3, 52, &mut replication_rng(9, rep)).unwrap();
            for (k, &c) in annual_counts(&s).counts.iter().enumerate() {
                sums[k] += c as f64;
                squares[k] += (c as f64).powi(2);
            }
        }
        for k in 0..3 {
            let mean = sums[k] / reps as f64;
            let sd = (squares[k] / reps as f64 - mean * mean).sqrt();
            let exact = expected_s(&theta, k + 1, sh).unwrap();
            assert!((mean - exact).abs() < 4.0 * sd / (reps as f64).sqrt(), "year {}", k + 1);
        }
    }

    #[test]
    fn report_fields_are_consistent() {
        let theta = ModelPreset::I.theta();
        let s = simulate_with_rng(&theta, 20, 52, &mut replication_rng(3, 0)).unwrap();
        let r = trend_report(&s, &theta).unwrap();
        assert_eq!(r.beta_per_century, 100.0 * r.beta_hat);
        assert!((r.z - r.beta_hat / r.var_beta.sqrt()).abs() < 1e-12);
        assert!(r.model_based_trend.unwrap().abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn slope_ignores_level_shifts(
            counts in proptest::collection::vec(0u32..40, 2..30),
            shift in 0u32..12,
        ) {
            let a = AnnualCounts { counts: counts.clone(), period: 52 };
            let b = AnnualCounts { counts: counts.iter().map(|c| c + shift).collect(), period: 52 };
            prop_assert!((beta_hat(&a).unwrap() - beta_hat(&b).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn expected_counts_bounded(a0 in -5.0..5.0f64, a1 in 0.1..20.0f64, k in 0.0..52.0f64, a0s in -5.0..5.0f64) {
            let theta = ThetaParams::from_array([a0, a1, k, 1e-3, a0s, a1, 52.0 - k, -1e-3]);
            let sh = shape(52, 8);
            let moments = SnowWeekMoments::new(&theta, sh);
            for n in 1..=8 {
                prop_assert!(moments.mean(n) >= 0.0 && moments.mean(n) <= 52.0);
                prop_assert!(moments.cov(n, n) >= -1e-9);
            }
            prop_assert!(moments.slope_variance().unwrap() >= 0.0);
        }
    }
}
