//! CSV and JSON outputs. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::classify::GroupLabel;
use super::hemisphere::GridOutcome;
use super::ingest::{parse_date, GridMeta};
use crate::chain::ThetaParams;
use crate::error::{Error, Result};
use crate::regression::{PeriodicFit, WeeklyAreaSeries};
use crate::series::BinarySeries;
use crate::simulation::RecoveryStudyResult;

pub const GRID_TRENDS_FILE: &str = "grid_trends.csv";
pub const GROUPS_FILE: &str = "grid_groups.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TOTAL_AREA_FILE: &str = "total_area.csv";
pub const REGRESSION_WEEKS_FILE: &str = "regression_weeks.csv";
pub const REGRESSION_SUMMARY_FILE: &str = "regression.json";

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, headers: &[&str], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(headers).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One row of the per-grid results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTrendRow {
    pub grid_id: String,
    pub row: Option<i32>,
    pub col: Option<i32>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub area_mkm2: f64,
    pub group: u8,
    pub reason: String,
    /// Review flags joined with `;`.
    pub flags: String,
    pub num_years: usize,
    pub snow_weeks: usize,
    pub beta_per_century: Option<f64>,
    pub se_per_century: Option<f64>,
    pub z: Option<f64>,
    pub p_two_sided: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_star: Option<f64>,
    pub model_based_trend_per_century: Option<f64>,
    pub error: Option<String>,
}

pub const GRID_TREND_HEADERS: [&str; 19] = [
    "grid_id",
    "row",
    "col",
    "lat",
    "lon",
    "area_mkm2",
    "group",
    "reason",
    "flags",
    "num_years",
    "snow_weeks",
    "beta_per_century",
    "se_per_century",
    "z",
    "p_two_sided",
    "alpha",
    "alpha_star",
    "model_based_trend_per_century",
    "error",
];

fn flag_list(label: &GroupLabel) -> String {
    label.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(";")
}

impl GridTrendRow {
    pub fn from_outcome(g: &GridOutcome) -> Self {
        let t = g.trend.as_ref();
        let theta = g.fit.as_ref().map(|f| f.theta_hat);
        Self {
            grid_id: g.meta.grid_id.clone(),
            row: g.meta.row,
            col: g.meta.col,
            lat: g.meta.lat,
            lon: g.meta.lon,
            area_mkm2: g.meta.area_mkm2,
            group: g.label.group.number(),
            reason: g.label.reason.as_str().to_string(),
            flags: flag_list(&g.label),
            num_years: g.num_years,
            snow_weeks: g.snow_weeks,
            beta_per_century: t.map(|t| t.beta_per_century),
            se_per_century: t.map(|t| t.std_error_per_century),
            z: t.map(|t| t.z),
            p_two_sided: t.map(|t| t.p_two_sided),
            alpha: theta.map(|th| th.alpha),
            alpha_star: theta.map(|th| th.alphas),
            model_based_trend_per_century: t.and_then(|t| t.model_based_trend).map(|m| 100.0 * m),
            error: g.error.clone(),
        }
    }
}

pub fn write_grid_trends(grids: &[GridOutcome], path: &Path) -> Result<()> {
    write_rows(grids.iter().map(GridTrendRow::from_outcome), &GRID_TREND_HEADERS, path)
}

pub fn read_grid_trends(path: &Path) -> Result<Vec<GridTrendRow>> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub grid_id: String,
    pub group: Option<u8>,
    pub reason: String,
    pub flags: String,
}

/// Pre-fit classification: groups 1 and 3 are final, other grids are left
/// without a group because group 2 depends on the fit.
pub fn write_groups(labels: &[(GridMeta, GroupLabel)], path: &Path) -> Result<()> {
    let rows = labels.iter().map(|(m, l)| {
        let settled = l.group.number() != 4;
        GroupRow {
            grid_id: m.grid_id.clone(),
            group: settled.then(|| l.group.number()),
            reason: if settled { l.reason.as_str() } else { "needs-fit" }.to_string(),
            flags: flag_list(l),
        }
    });
    write_rows(rows, &["grid_id", "group", "reason", "flags"], path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AreaRow {
    t: usize,
    date: Option<NaiveDate>,
    #[serde(rename = "G")]
    g: f64,
}

pub fn write_total_area(area: &WeeklyAreaSeries, dates: Option<&[NaiveDate]>, path: &Path) -> Result<()> {
    let rows = area.values().iter().enumerate().map(|(i, &g)| AreaRow {
        t: i + 1,
        date: dates.and_then(|d| d.get(i).copied()),
        g,
    });
    write_rows(rows, &["t", "date", "G"], path)
}

/// Reads `t,G` (and optionally `date`) rows; `t` must run 1, 2, ….
pub fn read_total_area(path: &Path, period: usize) -> Result<(WeeklyAreaSeries, Option<Vec<NaiveDate>>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (Some(t_col), Some(g_col)) = (find("t"), find("G")) else {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "area file needs columns `t` and `G`".into(),
        });
    };
    let date_col = find("date");
    let mut values = Vec::new();
    let mut dates = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let t: usize = record[t_col].parse().map_err(|_| bad(format!("bad week index `{}`", &record[t_col])))?;
        if t != values.len() + 1 {
            return Err(bad(format!("expected week {}, found {t}", values.len() + 1)));
        }
        let g: f64 = record[g_col].parse().map_err(|_| bad(format!("bad area `{}`", &record[g_col])))?;
        values.push(g);
        if let Some(c) = date_col {
            match record.get(c).filter(|s| !s.is_empty()) {
                Some(s) => dates.push(parse_date(s).ok_or_else(|| bad(format!("bad date `{s}`")))?),
                None => dates.clear(),
            }
        }
    }
    let dated = date_col.is_some() && dates.len() == values.len();
    let area = WeeklyAreaSeries::new(values, period).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((area, dated.then_some(dates)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionWeekRow {
    pub week: usize,
    pub mu: f64,
    pub beta: f64,
    pub beta_per_century: f64,
}

pub fn write_regression_weeks(fit: &PeriodicFit, path: &Path) -> Result<()> {
    let per_century = fit.beta_per_century();
    let rows = (0..fit.period).map(|nu| RegressionWeekRow {
        week: nu + 1,
        mu: fit.mu[nu],
        beta: fit.beta[nu],
        beta_per_century: per_century[nu],
    });
    write_rows(rows, &["week", "mu", "beta", "beta_per_century"], path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SeriesRow {
    t: usize,
    value: u8,
}

/// Writes a binary series as `t,value`.
pub fn write_series(series: &BinarySeries, path: &Path) -> Result<()> {
    let rows = series.values().iter().enumerate().map(|(i, &value)| SeriesRow { t: i + 1, value });
    write_rows(rows, &["t", "value"], path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ThetaRow {
    parameter: String,
    value: f64,
}

pub fn write_theta(theta: &ThetaParams, path: &Path) -> Result<()> {
    let rows = ThetaParams::NAMES.iter().zip(theta.to_array()).map(|(n, v)| ThetaRow {
        parameter: n.to_string(),
        value: v,
    });
    write_rows(rows, &["parameter", "value"], path)
}

/// Writes one row of estimates per successful replication.
pub fn write_recovery_estimates(study: &RecoveryStudyResult, path: &Path) -> Result<()> {
    let rows = (0..study.n_succeeded()).map(|i| std::array::from_fn::<f64, 8, _>(|k| study.estimates[k][i]));
    write_rows(rows, &ThetaParams::NAMES, path)
}
