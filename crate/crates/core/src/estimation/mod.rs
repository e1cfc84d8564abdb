//! Maximum-likelihood fitting of [`ThetaParams`] to a binary series.

mod likelihood;
mod optimize;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{LinkParams, ThetaParams};
use crate::error::{Error, Result};
use crate::series::BinarySeries;
use crate::stats::two_sided_p;

pub use likelihood::{
    covariance_matrix, log_likelihood, log_likelihood_gradient, log_likelihood_hessian,
    standard_errors,
};
use likelihood::Transitions;
use optimize::HalfFit;

/// Which maximizer runs from each start point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// Newton–Raphson in harmonic coordinates with exact derivatives.
    #[default]
    Newton,
    /// BFGS in natural coordinates with central-difference gradients.
    QuasiNewton,
}

/// Box from which start points beyond the stratified grid are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartBounds {
    pub level: (f64, f64),
    pub amplitude: (f64, f64),
    pub drift: (f64, f64),
}

impl Default for StartBounds {
    fn default() -> Self {
        Self {
            level: (-5.0, 5.0),
            amplitude: (0.5, 15.0),
            drift: (-1e-3, 1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the gradient norm in optimizer coordinates.
    pub gradient_tolerance: f64,
    pub n_restarts: usize,
    pub restart_seed: u64,
    pub parameter_bounds: StartBounds,
    pub method: FitMethod,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            n_restarts: 8,
            restart_seed: 0,
            parameter_bounds: StartBounds::default(),
            method: FitMethod::Newton,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts < 1 {
            return Err(Error::InvalidArgument("n_restarts must be at least 1".into()));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(Error::InvalidArgument(
                "gradient_tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Start points for one link: the stratified grid
    /// `level ∈ {-3, 0, 3}`, `amplitude ∈ {1, 10}`, `phase ∈ {T/4, 3T/4}`,
    /// zero drift, visited in a seed-determined order, then uniform draws
    /// from [`StartBounds`] once the grid is exhausted.
    pub fn start_points(&self, period: usize) -> Vec<LinkParams> {
        let p = period as f64;
        let mut grid = Vec::with_capacity(12);
        for level in [-3.0, 0.0, 3.0] {
            for amplitude in [1.0, 10.0] {
                for phase in [p / 4.0, 3.0 * p / 4.0] {
                    grid.push(LinkParams::new(level, amplitude, phase, 0.0));
                }
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.restart_seed);
        grid.shuffle(&mut rng);
        let b = &self.parameter_bounds;
        while grid.len() < self.n_restarts {
            grid.push(LinkParams::new(
                rng.random_range(b.level.0..=b.level.1),
                rng.random_range(b.amplitude.0..=b.amplitude.1),
                rng.random_range(0.0..p),
                rng.random_range(b.drift.0..=b.drift.1),
            ));
        }
        grid.truncate(self.n_restarts);
        grid
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Estimates with phases in `[0, T)` and positive amplitudes.
    pub theta_hat: ThetaParams,
    /// Standard errors in [`ThetaParams::NAMES`] order; NaN unless `hessian_ok`.
    pub std_errors: [f64; 8],
    pub loglik: f64,
    pub converged: bool,
    /// Restarts that reached the gradient tolerance (smaller of the two links).
    pub n_restarts_used: usize,
    pub hessian_ok: bool,
    /// Largest final gradient norm of the two links, in optimizer coordinates.
    pub gradient_norm: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn wald(&self, index: usize) -> Option<WaldTest> {
        wald_test(self.theta_hat.to_array()[index], self.std_errors[index]).ok()
    }
}

fn fit_half(tr: &Transitions, config: &FitConfig, time_scale: f64) -> Result<(HalfFit, usize)> {
    let starts = config.start_points(tr.period);
    let mut best: Option<HalfFit> = None;
    let mut best_norm = f64::INFINITY;
    let mut converged = 0;
    for start in &starts {
        let fit = match config.method {
            FitMethod::Newton => optimize::newton(
                tr,
                start,
                time_scale,
                config.max_iterations,
                config.gradient_tolerance,
            ),
            FitMethod::QuasiNewton => optimize::quasi_newton(
                tr,
                start,
                time_scale,
                config.max_iterations,
                config.gradient_tolerance,
            ),
        };
        best_norm = best_norm.min(fit.gradient_norm);
        if !fit.converged || !fit.loglik.is_finite() {
            continue;
        }
        converged += 1;
        if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
            best = Some(fit);
        }
    }
    best.map(|b| (b, converged)).ok_or(Error::NonConvergence {
        restarts: starts.len(),
        best_gradient_norm: best_norm,
    })
}

/// Maximizes the log-likelihood from every configured start point and keeps
/// the best converged result for each link.
pub fn fit_mle(series: &BinarySeries, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let (onsets, melts) = series.transition_counts();
    if onsets == 0 || melts == 0 {
        return Err(Error::DegenerateSeries { onsets, melts });
    }
    let time_scale = series.len() as f64;
    let from_bare = Transitions::from_state(series, 0);
    let from_snow = Transitions::from_state(series, 1);
    let (on, on_used) = fit_half(&from_bare, config, time_scale)?;
    let (off, off_used) = fit_half(&from_snow, config, time_scale)?;

    let theta_hat = ThetaParams::from_links(on.link, off.link).canonical(series.period());
    let (std_errors, hessian_ok) = match standard_errors(&theta_hat, series) {
        Ok(se) => (se, true),
        Err(_) => ([f64::NAN; 8], false),
    };
    Ok(FitResult {
        theta_hat,
        std_errors,
        loglik: on.loglik + off.loglik,
        converged: true,
        n_restarts_used: on_used.min(off_used),
        hessian_ok,
        gradient_norm: on.gradient_norm.max(off.gradient_norm),
        iterations: on.iterations + off.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub z: f64,
    pub p_two_sided: f64,
}

/// `z = estimate / se` against the standard normal.
pub fn wald_test(estimate: f64, std_error: f64) -> Result<WaldTest> {
    if !std_error.is_finite() || std_error <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "standard error must be positive and finite, got {std_error}"
        )));
    }
    let z = estimate / std_error;
    Ok(WaldTest {
        z,
        p_two_sided: two_sided_p(z),
    })
}

/// Reasons a grid is considered insufficiently described by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitConcern {
    /// No start point reached the gradient tolerance, or the series had no
    /// transition of some kind.
    NoConvergence,
    SingularInformation,
    /// `|a0|` or `|a0s|` above [`EXTREME_LEVEL`].
    ExtremeLevel,
    /// Fewer than [`MIN_TRANSITIONS`] transitions of either kind.
    FewTransitions,
}

pub const EXTREME_LEVEL: f64 = 50.0;
pub const MIN_TRANSITIONS: usize = 11;

/// Screens a fit outcome for the conditions that make a grid unfittable.
pub fn fit_concerns(series: &BinarySeries, outcome: Result<&FitResult, &Error>) -> Vec<FitConcern> {
    let mut concerns = Vec::new();
    match outcome {
        Ok(fit) => {
            if !fit.converged {
                concerns.push(FitConcern::NoConvergence);
            }
            if !fit.hessian_ok {
                concerns.push(FitConcern::SingularInformation);
            }
            if fit.theta_hat.a0.abs() > EXTREME_LEVEL || fit.theta_hat.a0s.abs() > EXTREME_LEVEL {
                concerns.push(FitConcern::ExtremeLevel);
            }
        }
        Err(Error::SingularInformation) => concerns.push(FitConcern::SingularInformation),
        Err(_) => concerns.push(FitConcern::NoConvergence),
    }
    let (onsets, melts) = series.transition_counts();
    if onsets < MIN_TRANSITIONS || melts < MIN_TRANSITIONS {
        concerns.push(FitConcern::FewTransitions);
    }
    concerns
}
