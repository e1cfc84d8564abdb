use serde::{Deserialize, Serialize};

use crate::chain::SeasonShape;
use crate::error::{Error, Result};

/// Where a series came from, when known.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesOrigin {
    pub grid_id: Option<String>,
    /// Calendar year in which the first winter-centered year begins (August).
    pub first_year: Option<i32>,
}

/// A weekly 0/1 snow presence series covering whole years.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarySeries {
    values: Vec<u8>,
    shape: SeasonShape,
    origin: Option<SeriesOrigin>,
}

impl BinarySeries {
    pub fn new(values: Vec<u8>, period: usize) -> Result<Self> {
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(Error::InvalidSeries(format!(
                "value {} at week {} is not 0 or 1",
                values[i],
                i + 1
            )));
        }
        let shape = SeasonShape::from_num_weeks(period, values.len())
            .map_err(|e| Error::InvalidSeries(e.to_string()))?;
        Ok(Self {
            values,
            shape,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: SeriesOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn shape(&self) -> SeasonShape {
        self.shape
    }

    pub fn period(&self) -> usize {
        self.shape.period()
    }

    pub fn num_years(&self) -> usize {
        self.shape.num_years()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn origin(&self) -> Option<&SeriesOrigin> {
        self.origin.as_ref()
    }

    /// Value at global 1-based week `t`.
    pub fn at(&self, t: usize) -> u8 {
        self.values[t - 1]
    }

    /// Weeks of one year (1-based).
    pub fn year(&self, year: usize) -> &[u8] {
        let period = self.period();
        &self.values[(year - 1) * period..year * period]
    }

    pub fn snow_weeks(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn bare_weeks(&self) -> usize {
        self.values.len() - self.snow_weeks()
    }

    /// Number of (bare->snow, snow->bare) transitions.
    pub fn transition_counts(&self) -> (usize, usize) {
        self.values
            .windows(2)
            .fold((0, 0), |(on, off), w| match (w[0], w[1]) {
                (0, 1) => (on + 1, off),
                (1, 0) => (on, off + 1),
                _ => (on, off),
            })
    }

    /// Concatenates two series with the same period.
    pub fn concat(&self, other: &BinarySeries) -> Result<BinarySeries> {
        if self.period() != other.period() {
            return Err(Error::InvalidArgument("periods differ".into()));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let mut out = BinarySeries::new(values, self.period())?;
        out.origin = self.origin.clone();
        Ok(out)
    }
}
