//! Rainfall data pipeline: daily ingestion, cleaning and monthly aggregation,
//! normalization, windowed samples, year splits and synthetic data.

mod cache;
mod calendar;
mod clean;
mod ingest;
mod normalize;
mod series;
mod synth;
mod windows;

pub use cache::{load_monthly_cache, read_monthly_cache, save_monthly_cache, write_monthly_cache, CACHE_HEADER};
pub use calendar::{is_monsoon_month, YearMonth, YearRange, MONSOON_MONTHS, MONTH_NAMES};
pub use clean::{clean_and_aggregate, CleanPolicy, CleaningReport, Exclusion, StationReport};
pub use ingest::{
    ingest_daily, ingest_daily_with, ingest_reader, DailyFormat, GeoBounds, IngestOptions, IngestReport, Ingested,
    IssueKind, RainfallRecord, RowIssue,
};
pub use normalize::{fit_normalizer, NormalizationParams};
pub use series::{MonthFlag, MonthlySeries};
pub use synth::{
    generate_synthetic, generate_synthetic_daily, write_daily_csv, DailySynthConfig, SynthConfig, ZoneProfile,
};
pub use windows::{
    build_windows, prepare_dataset, split_by_years, DatasetSplit, PreparedData, SplitYears, WindowSample,
    DEFAULT_WINDOW_MONTHS,
};
