//! Batch classification, fitting and trend analysis of every grid.

use std::collections::HashSet;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calendar::WinterCalendar;
use super::classify::{classify_group, needs_fit, ClassifyOptions, Group, GroupLabel};
use super::ingest::{GridDataset, GridMeta};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, FitConfig, FitResult};
use crate::regression::{total_area, WeeklyAreaSeries};
use crate::series::BinarySeries;
use crate::stats::{mean, Histogram};
use crate::trend::{trend_report, TrendReport};

/// A changepoint given as a global week index or a calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChangepointSpec {
    Week(usize),
    Date(NaiveDate),
}

impl ChangepointSpec {
    pub fn resolve(&self, calendar: Option<&WinterCalendar>) -> Result<usize> {
        match (*self, calendar) {
            (ChangepointSpec::Week(t), _) => Ok(t),
            (ChangepointSpec::Date(d), Some(cal)) => cal.week_of_date(d).ok_or_else(|| {
                Error::InvalidArgument(format!("date {d} is not on the winter-centered week axis"))
            }),
            (ChangepointSpec::Date(d), None) => Err(Error::InvalidArgument(format!(
                "changepoint date {d} needs dated input"
            ))),
        }
    }
}

impl std::str::FromStr for ChangepointSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(t) = s.parse::<usize>() {
            return Ok(ChangepointSpec::Week(t));
        }
        super::ingest::parse_date(s)
            .map(ChangepointSpec::Date)
            .ok_or_else(|| Error::InvalidArgument(format!("`{s}` is neither a week index nor a YYYY-MM-DD date")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fit: FitConfig,
    pub classify: ClassifyOptions,
    /// Worker threads for grid fits; the rayon default when absent.
    pub threads: Option<usize>,
    pub histogram_bins: usize,
    /// Grid ids assigned to group 3 regardless of their data.
    pub exclusions: Vec<String>,
    pub changepoint: Option<ChangepointSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            classify: ClassifyOptions::default(),
            threads: None,
            histogram_bins: 30,
            exclusions: Vec::new(),
            changepoint: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything the pipeline learned about one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub meta: GridMeta,
    pub num_years: usize,
    pub snow_weeks: usize,
    pub label: GroupLabel,
    pub fit: Option<FitResult>,
    pub trend: Option<TrendReport>,
    /// Fit or trend failure, kept for the report.
    pub error: Option<String>,
}

/// Classifies one winter-centered grid, fitting and computing its trend when
/// it reaches group 4.
pub fn analyze_grid(meta: &GridMeta, series: &BinarySeries, config: &PipelineConfig, excluded: bool) -> GridOutcome {
    let options = &config.classify;
    let mut outcome = GridOutcome {
        meta: meta.clone(),
        num_years: series.num_years(),
        snow_weeks: series.snow_weeks(),
        label: classify_group(series, None, excluded, options),
        fit: None,
        trend: None,
        error: None,
    };
    if !needs_fit(series, excluded, options) {
        return outcome;
    }
    let fit = fit_mle(series, &config.fit);
    outcome.label = classify_group(series, Some(fit.as_ref()), excluded, options);
    match fit {
        Ok(fit) => {
            if outcome.label.group == Group::Analyzed {
                match trend_report(series, &fit.theta_hat) {
                    Ok(report) => outcome.trend = Some(report),
                    Err(e) => outcome.error = Some(e.to_string()),
                }
            }
            outcome.fit = Some(fit);
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub grid_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendHistograms {
    pub beta_per_century: Histogram,
    pub alpha: Histogram,
    pub alpha_star: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemisphereSummary {
    pub n_grids: usize,
    /// Grids per group, groups 1 to 4.
    pub group_counts: [usize; 4],
    pub n_flagged_for_review: usize,
    pub n_analyzed: usize,
    pub n_positive_trend: usize,
    /// Includes grids whose trend is exactly zero.
    pub n_negative_trend: usize,
    /// Mean β̂ in snow weeks per century over analyzed grids.
    pub mean_trend_per_century: Option<f64>,
    pub failures: Vec<GridFailure>,
    pub histograms: TrendHistograms,
    #[serde(skip)]
    pub grids: Vec<GridOutcome>,
}

pub fn summarize(grids: Vec<GridOutcome>, bins: usize) -> HemisphereSummary {
    let mut group_counts = [0; 4];
    for g in &grids {
        group_counts[g.label.group.number() as usize - 1] += 1;
    }
    let analyzed: Vec<&GridOutcome> = grids.iter().filter(|g| g.trend.is_some()).collect();
    let betas: Vec<f64> = analyzed
        .iter()
        .map(|g| g.trend.as_ref().map_or(f64::NAN, |t| t.beta_per_century))
        .collect();
    let fits = || analyzed.iter().filter_map(|g| g.fit.as_ref());
    let alphas: Vec<f64> = fits().map(|f| f.theta_hat.alpha).collect();
    let alpha_stars: Vec<f64> = fits().map(|f| f.theta_hat.alphas).collect();
    let n_positive = betas.iter().filter(|&&b| b > 0.0).count();
    HemisphereSummary {
        n_grids: grids.len(),
        group_counts,
        n_flagged_for_review: grids.iter().filter(|g| !g.label.flags.is_empty()).count(),
        n_analyzed: analyzed.len(),
        n_positive_trend: n_positive,
        n_negative_trend: analyzed.len() - n_positive,
        mean_trend_per_century: (!betas.is_empty()).then(|| mean(&betas)),
        failures: grids
            .iter()
            .filter_map(|g| {
                g.error.as_ref().map(|m| GridFailure {
                    grid_id: g.meta.grid_id.clone(),
                    message: m.clone(),
                })
            })
            .collect(),
        histograms: TrendHistograms {
            beta_per_century: Histogram::new(&betas, bins),
            alpha: Histogram::new(&alphas, bins),
            alpha_star: Histogram::new(&alpha_stars, bins),
        },
        grids,
    }
}

/// Winter-centers every grid of a dataset on the shared calendar.
pub fn center_dataset(dataset: &GridDataset) -> Result<(WinterCalendar, Vec<BinarySeries>)> {
    let calendar = WinterCalendar::from_dates(&dataset.dates, "dataset")?;
    let series = dataset
        .grids
        .iter()
        .map(|g| calendar.center(g))
        .collect::<Result<Vec<_>>>()?;
    Ok((calendar, series))
}

/// Runs `work` on a dedicated pool of `threads` workers, or the global pool.
pub fn with_pool<T: Send>(threads: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(work()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(work))
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} worker threads: {e}"))),
    }
}

/// Analyzes centered grids in parallel. Output order follows the input.
pub fn analyze_all(grids: &[(GridMeta, BinarySeries)], config: &PipelineConfig) -> Result<Vec<GridOutcome>> {
    config.validate()?;
    let excluded: HashSet<&str> = config.exclusions.iter().map(String::as_str).collect();
    with_pool(config.threads, || {
        grids
            .par_iter()
            .map(|(meta, series)| analyze_grid(meta, series, config, excluded.contains(meta.grid_id.as_str())))
            .collect()
    })
}

/// Classification only: groups 1 and 3 plus review flags, no fitting.
pub fn classify_dataset(dataset: &GridDataset, config: &PipelineConfig) -> Result<Vec<(GridMeta, GroupLabel)>> {
    let (_, series) = center_dataset(dataset)?;
    let excluded: HashSet<&str> = config.exclusions.iter().map(String::as_str).collect();
    Ok(dataset
        .grids
        .iter()
        .zip(&series)
        .map(|(g, s)| {
            let ex = excluded.contains(g.meta.grid_id.as_str());
            (g.meta.clone(), classify_group(s, None, ex, &config.classify))
        })
        .collect())
}

pub fn run_hemisphere(dataset: &GridDataset, config: &PipelineConfig) -> Result<HemisphereSummary> {
    if dataset.grids.is_empty() {
        return Err(Error::InvalidArgument("no grids to analyze".into()));
    }
    let (_, series) = center_dataset(dataset)?;
    let grids: Vec<(GridMeta, BinarySeries)> = dataset
        .grids
        .iter()
        .map(|g| g.meta.clone())
        .zip(series)
        .collect();
    Ok(summarize(analyze_all(&grids, config)?, config.histogram_bins))
}

/// Total snow-covered area of all grids on the winter-centered axis.
pub fn dataset_total_area(dataset: &GridDataset) -> Result<(WinterCalendar, WeeklyAreaSeries)> {
    let (calendar, series) = center_dataset(dataset)?;
    let area = total_area(series.iter().zip(&dataset.grids).map(|(s, g)| (s, g.meta.area_mkm2)))?;
    Ok((calendar, area))
}
