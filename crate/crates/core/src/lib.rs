//! Two-state periodic Markov chain for weekly snow presence: fitting,
//! simulation, trend inference on annual snow-week counts, periodic
//! regression with a changepoint, and a per-grid classification pipeline.

pub mod chain;
pub mod error;
pub mod estimation;
pub mod pipeline;
pub mod regression;
pub mod series;
pub mod simulation;
pub mod stats;
pub mod trend;

#[cfg(test)]
pub(crate) mod test_support;

pub use chain::{
    logistic, marginal, marginal_table, multi_step_matrix, transition_matrix, transition_probs,
    LinkParams, MarginalDist, SeasonShape, ThetaParams, TransitionMatrix, DEFAULT_PERIOD,
};
pub use error::{Error, ErrorKind, Result};
pub use estimation::{
    fit_concerns, fit_mle, log_likelihood, log_likelihood_gradient, standard_errors, wald_test,
    FitConcern, FitConfig, FitMethod, FitResult, StartBounds, WaldTest,
};
pub use regression::{fit_periodic, fit_periodic_with_changepoint, PeriodicFit, WeeklyAreaSeries};
pub use series::{BinarySeries, SeriesOrigin};
pub use simulation::{run_recovery_study, simulate, ModelPreset, RecoveryStudyResult};
pub use trend::{
    annual_counts, beta_hat, cov_s, expected_s, model_based_trend, trend_report, trend_test,
    var_beta, AnnualCounts, SnowWeekMoments, TrendReport,
};
