//! Per-grid batch processing: ingestion, winter-centering, quality groups,
//! hemisphere-wide trend analysis and export.

pub mod calendar;
pub mod classify;
pub mod export;
pub mod hemisphere;
pub mod ingest;

pub use calendar::{winter_center, WinterCalendar, WEEKS_PER_YEAR};
pub use classify::{classify_group, ClassifyOptions, Group, GroupLabel, GroupReason, ReviewFlag};
pub use hemisphere::{
    analyze_all, analyze_grid, classify_dataset, dataset_total_area, run_hemisphere, summarize, with_pool,
    ChangepointSpec, GridOutcome, HemisphereSummary, PipelineConfig,
};
pub use ingest::{ingest, ingest_dir, read_exclusions, read_series, GridDataset, GridMeta, GridRecord};
