//! Reading and writing the long-form observation CSV and the grid metadata CSV.
//!
//! Observations: `grid_id,date,value` with ISO dates and 0/1 values, one row
//! per grid and week. Metadata: `grid_id,row,col,lat,lon,area_mkm2`, where
//! everything but `grid_id` and `area_mkm2` may be left empty.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::calendar::{WinterCalendar, WEEKS_PER_YEAR};
use crate::error::{Error, Result};
use crate::series::{BinarySeries, SeriesOrigin};

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const METADATA_FILE: &str = "grids.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub grid_id: String,
    pub row: Option<i32>,
    pub col: Option<i32>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub area_mkm2: f64,
}

/// One grid's raw weekly observations on the dataset's date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRecord {
    pub meta: GridMeta,
    pub values: Vec<u8>,
}

/// Grids sharing one strictly increasing weekly date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    pub dates: Vec<NaiveDate>,
    pub grids: Vec<GridRecord>,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

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

fn column(headers: &csv::StringRecord, path: &Path, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: format!("missing column `{name}`"),
    })
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

struct Observation {
    date: NaiveDate,
    value: u8,
    line: u64,
}

/// Grid id and its weekly values on the shared date axis.
pub type GridValues = (String, Vec<u8>);

/// Reads the observation CSV into a common date axis and per-grid values, in
/// order of first appearance.
pub fn read_observations(path: &Path) -> Result<(Vec<NaiveDate>, Vec<GridValues>)> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let id_col = column(&headers, path, "grid_id")?;
    let date_col = column(&headers, path, "date")?;
    let value_col = column(&headers, path, "value")?;

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut grids: Vec<(String, Vec<Observation>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let id = record.get(id_col).unwrap_or("");
        if id.is_empty() {
            return Err(bad("empty grid_id".into()));
        }
        let raw_date = record.get(date_col).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| bad(format!("invalid date `{raw_date}`")))?;
        let value = match record.get(value_col).unwrap_or("") {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("value `{other}` is not 0 or 1"))),
        };
        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            grids.push((id.to_string(), Vec::new()));
            grids.len() - 1
        });
        grids[slot].1.push(Observation { date, value, line });
    }
    if grids.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no observations".into(),
        });
    }

    let mut axis: Option<Vec<NaiveDate>> = None;
    let mut out = Vec::with_capacity(grids.len());
    for (id, mut obs) in grids {
        obs.sort_by_key(|o| (o.date, o.line));
        if let Some(w) = obs.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: w[1].line,
                message: format!("duplicate date {} for grid {id}", w[1].date),
            });
        }
        let dates: Vec<NaiveDate> = obs.iter().map(|o| o.date).collect();
        match &axis {
            None => axis = Some(dates),
            Some(common) if *common != dates => {
                let message = match common.iter().zip(&dates).position(|(a, b)| a != b) {
                    Some(i) => format!("week {} is dated {} instead of {}", i + 1, dates[i], common[i]),
                    None => format!("{} weeks instead of {}", dates.len(), common.len()),
                };
                return Err(Error::InconsistentDates { grid_id: id, message });
            }
            Some(_) => {}
        }
        out.push((id, obs.into_iter().map(|o| o.value).collect()));
    }
    Ok((axis.unwrap_or_default(), out))
}

pub fn read_metadata(path: &Path) -> Result<Vec<GridMeta>> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for name in ["grid_id", "area_mkm2"] {
        column(&headers, path, name)?;
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let meta: GridMeta = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if !(meta.area_mkm2 > 0.0 && meta.area_mkm2.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("area_mkm2 must be positive, got {}", meta.area_mkm2),
            });
        }
        out.push(meta);
    }
    Ok(out)
}

/// Joins observations with metadata. Grids without observations are ignored.
pub fn ingest(observations: &Path, metadata: &Path) -> Result<GridDataset> {
    let (dates, series) = read_observations(observations)?;
    let mut metas: HashMap<String, GridMeta> = read_metadata(metadata)?
        .into_iter()
        .map(|m| (m.grid_id.clone(), m))
        .collect();
    let grids = series
        .into_iter()
        .map(|(id, values)| {
            let meta = metas.remove(&id).ok_or_else(|| Error::Format {
                path: metadata.to_path_buf(),
                message: format!("no metadata for grid {id}"),
            })?;
            Ok(GridRecord { meta, values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridDataset { dates, grids })
}

pub fn data_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(OBSERVATIONS_FILE), dir.join(METADATA_FILE))
}

/// Reads `observations.csv` and `grids.csv` from a directory.
pub fn ingest_dir(dir: &Path) -> Result<GridDataset> {
    let (obs, meta) = data_paths(dir);
    ingest(&obs, &meta)
}

/// One grid id per line; blank lines and `#` comments are ignored.
pub fn read_exclusions(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let id = line.split('#').next().unwrap_or("").trim();
        if !id.is_empty() {
            out.push(id.to_string());
        }
    }
    Ok(out)
}

/// Reads one series with a `value` column. With a `date` column the weeks are
/// winter-centered; otherwise rows are taken as already centered whole years.
pub fn read_series(path: &Path, period: usize) -> Result<BinarySeries> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let value_col = column(&headers, path, "value")?;
    let date_col = headers.iter().position(|h| h == "date");
    let mut values = Vec::new();
    let mut dates = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        values.push(match record.get(value_col).unwrap_or("") {
            "0" => 0u8,
            "1" => 1u8,
            other => return Err(bad(format!("value `{other}` is not 0 or 1"))),
        });
        if let Some(c) = date_col {
            let raw = record.get(c).unwrap_or("");
            dates.push(parse_date(raw).ok_or_else(|| bad(format!("invalid date `{raw}`")))?);
        }
    }
    let label = path.display().to_string();
    let series = match date_col {
        Some(_) => {
            let calendar = WinterCalendar::from_dates(&dates, &label)?;
            if period != WEEKS_PER_YEAR {
                return Err(Error::InvalidArgument(format!(
                    "dated series are centered on {WEEKS_PER_YEAR}-week years, not {period}"
                )));
            }
            BinarySeries::new(calendar.apply(&values), WEEKS_PER_YEAR)?.with_origin(SeriesOrigin {
                grid_id: None,
                first_year: Some(calendar.first_year()),
            })
        }
        None => BinarySeries::new(values, period).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?,
    };
    Ok(series)
}

pub fn write_observations(dataset: &GridDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["grid_id", "date", "value"]).map_err(|e| csv_error(path, e))?;
    for grid in &dataset.grids {
        for (date, value) in dataset.dates.iter().zip(&grid.values) {
            w.write_record([
                grid.meta.grid_id.as_str(),
                &date.format("%Y-%m-%d").to_string(),
                &value.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metadata(dataset: &GridDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for grid in &dataset.grids {
        w.serialize(&grid.meta).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn toy_observations(grids: &[&str], weeks: usize) -> String {
        let start = NaiveDate::from_ymd_opt(2000, 8, 3).unwrap();
        let mut body = String::from("grid_id,date,value\n");
        for (g, id) in grids.iter().enumerate() {
            for w in 0..weeks {
                let date = start + chrono::Duration::weeks(w as i64);
                body += &format!("{id},{date},{}\n", (w / 7 + g) % 2);
            }
        }
        body
    }

    #[test]
    fn two_grid_toy_file() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), OBSERVATIONS_FILE, &toy_observations(&["a", "b"], 156));
        write(
            dir.path(),
            METADATA_FILE,
            "grid_id,row,col,lat,lon,area_mkm2\nb,1,2,50.5,-100,0.04\na,,,,,0.03\n",
        );
        let ds = ingest_dir(dir.path()).unwrap();
        assert_eq!(ds.dates.len(), 156);
        assert_eq!(ds.grids.len(), 2);
        assert_eq!(ds.grids[0].meta.grid_id, "a");
        assert_eq!(ds.grids[0].meta.row, None);
        assert_eq!(ds.grids[1].meta.lat, Some(50.5));
        assert!(ds.grids.iter().all(|g| g.values.len() == 156));
    }

    #[test]
    fn bad_value_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "obs.csv",
            "grid_id,date,value\na,2000-08-03,0\na,2000-08-10,2\n",
        );
        match read_observations(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains('2'));
            }
            other => panic!("{other:?}"),
        }
        let path = write(dir.path(), "obs2.csv", "grid_id,date,value\na,2000-13-03,0\n");
        assert!(matches!(read_observations(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn rows_may_come_in_any_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "obs.csv",
            "grid_id,date,value\na,2000-08-10,1\nb,2000-08-03,0\na,2000-08-03,0\nb,2000-08-10,0\n",
        );
        let (dates, grids) = read_observations(&path).unwrap();
        assert_eq!(dates.len(), 2);
        assert_eq!(grids[0], ("a".to_string(), vec![0, 1]));
    }

    #[test]
    fn disagreeing_axes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "obs.csv",
            "grid_id,date,value\na,2000-08-03,0\na,2000-08-10,1\nb,2000-08-03,0\nb,2000-08-17,0\n",
        );
        assert!(matches!(
            read_observations(&path),
            Err(Error::InconsistentDates { grid_id, .. }) if grid_id == "b"
        ));
        let path = write(
            dir.path(),
            "dup.csv",
            "grid_id,date,value\na,2000-08-03,0\na,2000-08-03,1\n",
        );
        assert!(matches!(read_observations(&path), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn metadata_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "m.csv", "grid_id,area_mkm2\na,0\n");
        assert!(matches!(read_metadata(&path), Err(Error::Parse { line: 2, .. })));
        let path = write(dir.path(), "m2.csv", "grid_id,area\na,1\n");
        assert!(matches!(read_metadata(&path), Err(Error::Format { .. })));
        let obs = write(dir.path(), "o.csv", "grid_id,date,value\nz,2000-08-03,0\n");
        let meta = write(dir.path(), "m3.csv", "grid_id,area_mkm2\na,1\n");
        assert!(matches!(ingest(&obs, &meta), Err(Error::Format { .. })));
        assert!(matches!(
            ingest(&dir.path().join("missing.csv"), &meta),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn export_and_reingest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), OBSERVATIONS_FILE, &toy_observations(&["x1", "x2", "x3"], 60));
        write(
            dir.path(),
            METADATA_FILE,
            "grid_id,row,col,lat,lon,area_mkm2\nx1,3,4,61.25,-140.125,0.0419\nx2,,,,,0.01\nx3,1,1,0.1,0.2,0.3\n",
        );
        let ds = ingest_dir(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        let (obs, meta) = data_paths(out.path());
        write_observations(&ds, &obs).unwrap();
        write_metadata(&ds, &meta).unwrap();
        assert_eq!(ingest_dir(out.path()).unwrap(), ds);
    }

    #[test]
    fn single_series_files() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (1..=8).map(|t| format!("{t},{}\n", t % 2)).collect();
        let path = write(dir.path(), "s.csv", &format!("t,value\n{body}"));
        let s = read_series(&path, 4).unwrap();
        assert_eq!(s.values(), &[1, 0, 1, 0, 1, 0, 1, 0]);
        assert!(matches!(read_series(&path, 3), Err(Error::Format { .. })));

        let start = NaiveDate::from_ymd_opt(2001, 6, 7).unwrap();
        let body: String = (0..130)
            .map(|w| format!("{},{}\n", start + chrono::Duration::weeks(w), (w / 5) % 2))
            .collect();
        let path = write(dir.path(), "d.csv", &format!("date,value\n{body}"));
        let s = read_series(&path, 52).unwrap();
        assert_eq!(s.num_years(), 2);
        assert_eq!(s.origin().unwrap().first_year, Some(2001));
        assert!(read_series(&path, 4).is_err());
    }

    #[test]
    fn exclusion_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "ex.txt", "# untrusted\ng1\n\n  g2  # note\n");
        assert_eq!(read_exclusions(&path).unwrap(), vec!["g1", "g2"]);
    }
}
