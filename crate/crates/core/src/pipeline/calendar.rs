//! Winter-centered years: 52 weeks starting with the first week whose start
//! date falls in August.
//!
//! Weeks before the first such start and any trailing partial year are
//! dropped. A year that has 53 weekly observations loses its final (late
//! July) week.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::ingest::GridRecord;
use crate::error::{Error, Result};
use crate::series::{BinarySeries, SeriesOrigin};

pub const WEEKS_PER_YEAR: usize = 52;
const START_MONTH: u32 = 8;
pub const MIN_YEARS: usize = 2;

/// Which raw weeks survive winter-centering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinterCalendar {
    /// Positions in the raw date axis of the kept weeks.
    kept: Vec<usize>,
    dates: Vec<NaiveDate>,
    first_year: i32,
}

fn is_year_start(dates: &[NaiveDate], i: usize) -> bool {
    let d = dates[i];
    if d.month() != START_MONTH {
        return false;
    }
    if i == 0 {
        // A record starting mid-August has missed the first week.
        d.day() <= 7
    } else {
        dates[i - 1].month() != START_MONTH
    }
}

impl WinterCalendar {
    /// `label` names the record in error messages.
    pub fn from_dates(dates: &[NaiveDate], label: &str) -> Result<Self> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InconsistentDates {
                grid_id: label.to_string(),
                message: format!("dates not strictly increasing at {}", w[1]),
            });
        }
        let starts: Vec<usize> = (0..dates.len()).filter(|&i| is_year_start(dates, i)).collect();
        let mut kept = Vec::new();
        for (k, &s) in starts.iter().enumerate() {
            let available = match starts.get(k + 1) {
                Some(&next) => {
                    let len = next - s;
                    if len != WEEKS_PER_YEAR && len != WEEKS_PER_YEAR + 1 {
                        return Err(Error::InconsistentDates {
                            grid_id: label.to_string(),
                            message: format!(
                                "winter year starting {} has {len} weeks, expected 52 or 53",
                                dates[s]
                            ),
                        });
                    }
                    len
                }
                // Trailing year: keep it only if it is complete.
                None => dates.len() - s,
            };
            if available >= WEEKS_PER_YEAR {
                kept.extend(s..s + WEEKS_PER_YEAR);
            }
        }
        let years = kept.len() / WEEKS_PER_YEAR;
        if years < MIN_YEARS {
            return Err(Error::InsufficientSpan {
                grid_id: label.to_string(),
                complete_years: years,
                required: MIN_YEARS,
            });
        }
        let first_year = dates[kept[0]].year();
        Ok(Self {
            dates: kept.iter().map(|&i| dates[i]).collect(),
            kept,
            first_year,
        })
    }

    pub fn num_years(&self) -> usize {
        self.kept.len() / WEEKS_PER_YEAR
    }

    pub fn num_weeks(&self) -> usize {
        self.kept.len()
    }

    /// Calendar year in which the first winter-centered year begins.
    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    /// Start dates of the kept weeks.
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn date_of_week(&self, t: usize) -> Option<NaiveDate> {
        t.checked_sub(1).and_then(|i| self.dates.get(i).copied())
    }

    /// Global 1-based index of the kept week containing `date`.
    pub fn week_of_date(&self, date: NaiveDate) -> Option<usize> {
        let i = self.dates.partition_point(|d| *d <= date).checked_sub(1)?;
        ((date - self.dates[i]).num_days() < 7).then_some(i + 1)
    }

    pub fn apply<T: Copy>(&self, raw: &[T]) -> Vec<T> {
        self.kept.iter().map(|&i| raw[i]).collect()
    }

    pub fn center(&self, record: &GridRecord) -> Result<BinarySeries> {
        let series = BinarySeries::new(self.apply(&record.values), WEEKS_PER_YEAR)?;
        Ok(series.with_origin(SeriesOrigin {
            grid_id: Some(record.meta.grid_id.clone()),
            first_year: Some(self.first_year),
        }))
    }
}

/// Winter-centers one record on its date axis.
pub fn winter_center(record: &GridRecord, dates: &[NaiveDate]) -> Result<BinarySeries> {
    if record.values.len() != dates.len() {
        return Err(Error::InconsistentDates {
            grid_id: record.meta.grid_id.clone(),
            message: format!("{} values for {} dates", record.values.len(), dates.len()),
        });
    }
    WinterCalendar::from_dates(dates, &record.meta.grid_id)?.center(record)
}
