//! Sample paths and parameter-recovery studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{transition_probs, ThetaParams};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, FitConfig};
use crate::series::BinarySeries;
use crate::stats;

/// The five reference parameter sets of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelPreset {
    I,
    II,
    III,
    IV,
    V,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 5] = [
        ModelPreset::I,
        ModelPreset::II,
        ModelPreset::III,
        ModelPreset::IV,
        ModelPreset::V,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelPreset::I => "I",
            ModelPreset::II => "II",
            ModelPreset::III => "III",
            ModelPreset::IV => "IV",
            ModelPreset::V => "V",
        }
    }

    pub fn theta(&self) -> ThetaParams {
        let v = match self {
            ModelPreset::I => [0.0, 30.0, 25.0, 0.0, 0.0, 30.0, 0.0, 0.0],
            ModelPreset::II => [0.0, 30.0, 25.0, 0.0, 0.0, 30.0, 42.0, 0.0],
            ModelPreset::III => [0.0, 30.0, 20.0, 0.0, 0.0, 30.0, 0.0, 0.0],
            ModelPreset::IV => [-30.0, 30.0, 25.0, 0.0, 30.0, 30.0, 0.0, 0.0],
            ModelPreset::V => [30.0, 30.0, 25.0, 0.0, -30.0, 30.0, 0.0, 0.0],
        };
        ThetaParams::from_array(v)
    }
}

impl std::str::FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ModelPreset::I),
            "II" | "2" => Ok(ModelPreset::II),
            "III" | "3" => Ok(ModelPreset::III),
            "IV" | "4" => Ok(ModelPreset::IV),
            "V" | "5" => Ok(ModelPreset::V),
            other => Err(Error::InvalidArgument(format!("unknown model preset {other:?}"))),
        }
    }
}

/// Generator for replication `stream` of a study seeded with `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a path starting on bare ground in week 1.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    theta: &ThetaParams,
    num_years: usize,
    period: usize,
    rng: &mut R,
) -> Result<BinarySeries> {
    if num_years < 1 {
        return Err(Error::InvalidArgument("num_years must be at least 1".into()));
    }
    let n = num_years * period;
    let mut values = Vec::with_capacity(n);
    values.push(0u8);
    for t in 2..=n {
        let (p01, p10) = transition_probs(theta, t, period);
        let u: f64 = rng.random();
        let next = match values[t - 2] {
            0 => (u < p01) as u8,
            _ => (u >= p10) as u8,
        };
        values.push(next);
    }
    BinarySeries::new(values, period)
}

/// Deterministic path for `seed`.
pub fn simulate(theta: &ThetaParams, num_years: usize, period: usize, seed: u64) -> Result<BinarySeries> {
    simulate_with_rng(theta, num_years, period, &mut replication_rng(seed, 0))
}

/// Fraction of snow weeks in each year.
pub fn annual_snow_fraction(series: &BinarySeries) -> Vec<f64> {
    let period = series.period() as f64;
    series
        .values()
        .chunks(series.period())
        .map(|year| year.iter().map(|&v| v as f64).sum::<f64>() / period)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub truth: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean_bias: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStudyResult {
    pub truth: ThetaParams,
    pub num_years: usize,
    pub period: usize,
    pub n_reps: usize,
    /// `estimates[k]` holds every successful replication's estimate of
    /// parameter `k` ([`ThetaParams::NAMES`] order).
    pub estimates: [Vec<f64>; 8],
    /// Reported standard errors, aligned with `estimates`.
    pub std_errors: [Vec<f64>; 8],
    /// Replication index and error message of each failed fit.
    pub failures: Vec<(usize, String)>,
}

impl RecoveryStudyResult {
    pub fn n_succeeded(&self) -> usize {
        self.estimates[0].len()
    }

    /// Estimates of parameter `k`. Phases are unwrapped to lie within half
    /// a period of the truth, so a true phase of 0 is not split between the
    /// two ends of `[0, T)`.
    pub fn estimates_near_truth(&self, k: usize) -> Vec<f64> {
        let truth = self.truth.to_array()[k];
        if !ThetaParams::PHASE_INDICES.contains(&k) {
            return self.estimates[k].clone();
        }
        let period = self.period as f64;
        let half = period / 2.0;
        self.estimates[k]
            .iter()
            .map(|&x| truth + (x - truth + half).rem_euclid(period) - half)
            .collect()
    }

    /// Summary of each parameter's sampling distribution over successful fits.
    pub fn summary(&self) -> Option<[ParameterSummary; 8]> {
        if self.n_succeeded() == 0 {
            return None;
        }
        let truth = self.truth.to_array();
        Some(std::array::from_fn(|k| {
            let xs = &self.estimates_near_truth(k);
            ParameterSummary {
                truth: truth[k],
                median: stats::median(xs),
                q1: stats::quantile(xs, 0.25),
                q3: stats::quantile(xs, 0.75),
                mean_bias: stats::mean(xs) - truth[k],
                std_dev: if xs.len() > 1 {
                    stats::sample_variance(xs).sqrt()
                } else {
                    0.0
                },
            }
        }))
    }
}

/// Runs `n_reps` independent simulate-then-fit cycles in parallel.
///
/// Replication `i` uses stream `i` of the generator seeded with `seed`, so
/// results do not depend on thread scheduling.
pub fn run_recovery_study(
    theta: &ThetaParams,
    num_years: usize,
    period: usize,
    n_reps: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<RecoveryStudyResult> {
    if n_reps < 1 {
        return Err(Error::InvalidArgument("n_reps must be at least 1".into()));
    }
    let outcomes: Vec<Result<_>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep as u64);
            let series = simulate_with_rng(theta, num_years, period, &mut rng)?;
            fit_mle(&series, config)
        })
        .collect();

    let mut estimates: [Vec<f64>; 8] = Default::default();
    let mut std_errors: [Vec<f64>; 8] = Default::default();
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(fit) => {
                let est = fit.theta_hat.to_array();
                for k in 0..8 {
                    estimates[k].push(est[k]);
                    std_errors[k].push(fit.std_errors[k]);
                }
            }
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    Ok(RecoveryStudyResult {
        truth: *theta,
        num_years,
        period,
        n_reps,
        estimates,
        std_errors,
        failures,
    })
}
