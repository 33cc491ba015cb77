//! Daily rainfall CSV ingestion.
//!
//! Two layouts are accepted:
//!
//! * `wrd_station`: `station_id,latitude,longitude,date,rainfall_mm` (an
//!   optional trailing `zone` column is kept as station metadata)
//! * `imd_grid`: `lat,lon,date,rainfall_mm`, with the station id synthesized
//!   as `grid_<lat>_<lon>` from the raw coordinate text
//!
//! Dates are `YYYY-MM-DD`; a missing reading is an empty field or `NA`.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DailyFormat {
    ImdGrid,
    WrdStation,
}

impl fmt::Display for DailyFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DailyFormat::ImdGrid => "imd_grid",
            DailyFormat::WrdStation => "wrd_station",
        })
    }
}

impl std::str::FromStr for DailyFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imd_grid" => Ok(DailyFormat::ImdGrid),
            "wrd_station" => Ok(DailyFormat::WrdStation),
            _ => Err(Error::Parse(format!("unknown daily format `{s}`"))),
        }
    }
}

/// One daily gauge (or grid cell) reading. `rainfall_mm` is `None` when missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainfallRecord {
    pub station_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub date: NaiveDate,
    pub rainfall_mm: Option<f64>,
    pub zone: Option<String>,
}

/// Latitude/longitude box, degrees north/east.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoBounds {
    /// Rajasthan: 23°3.5'N–30°14'N, 69°27'E–78°19'E.
    pub const RAJASTHAN: GeoBounds = GeoBounds {
        lat_min: 23.058,
        lat_max: 30.233,
        lon_min: 69.45,
        lon_max: 78.317,
    };

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOptions {
    /// Rows outside the box are rejected as malformed. `None` disables the check.
    pub bounds: Option<GeoBounds>,
    /// Fraction of malformed rows above which ingestion fails.
    pub max_malformed_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            bounds: Some(GeoBounds::RAJASTHAN),
            max_malformed_fraction: 0.10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    /// Row could not be parsed; no record was produced.
    Malformed,
    /// Coordinates outside the configured bounds; no record was produced.
    OutOfBounds,
    /// Negative reading; the record is kept with a missing value.
    NegativeValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowIssue {
    pub line: u64,
    pub kind: IssueKind,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_rows: usize,
    pub issues: Vec<RowIssue>,
}

impl IngestReport {
    /// Rows that produced no record.
    pub fn rejected_rows(&self) -> usize {
        self.issues
            .iter()
            .filter(|i| i.kind != IssueKind::NegativeValue)
            .count()
    }

    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub records: Vec<RainfallRecord>,
    pub report: IngestReport,
}

pub fn ingest_daily(path: impl AsRef<Path>, format: DailyFormat) -> Result<Ingested> {
    ingest_daily_with(path, format, &IngestOptions::default())
}

pub fn ingest_daily_with(path: impl AsRef<Path>, format: DailyFormat, options: &IngestOptions) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, format, options)
}

struct Columns {
    station: Option<usize>,
    lat: usize,
    lon: usize,
    date: usize,
    rain: usize,
    zone: Option<usize>,
}

fn locate_columns(headers: &csv::StringRecord, format: DailyFormat) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need =
        |name: &str| find(name).ok_or_else(|| Error::Parse(format!("{format} header is missing column `{name}`")));
    Ok(match format {
        DailyFormat::WrdStation => Columns {
            station: Some(need("station_id")?),
            lat: need("latitude")?,
            lon: need("longitude")?,
            date: need("date")?,
            rain: need("rainfall_mm")?,
            zone: find("zone"),
        },
        DailyFormat::ImdGrid => Columns {
            station: None,
            lat: need("lat")?,
            lon: need("lon")?,
            date: need("date")?,
            rain: need("rainfall_mm")?,
            zone: None,
        },
    })
}

enum RowOutcome {
    Record(RainfallRecord, Option<RowIssue>),
    Rejected(IssueKind, String),
}

fn parse_row(row: &csv::StringRecord, width: usize, cols: &Columns, options: &IngestOptions) -> RowOutcome {
    use RowOutcome::Rejected;
    if row.len() != width {
        return Rejected(
            IssueKind::Malformed,
            format!("expected {width} fields, found {}", row.len()),
        );
    }
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let coord = |i: usize, what: &str| {
        field(i)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad {what} `{}`", field(i)))
    };
    let (lat, lon) = match (coord(cols.lat, "latitude"), coord(cols.lon, "longitude")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Rejected(IssueKind::Malformed, e),
    };
    let date = match NaiveDate::parse_from_str(field(cols.date), "%Y-%m-%d") {
        Ok(d) => d,
        Err(_) => return Rejected(IssueKind::Malformed, format!("bad date `{}`", field(cols.date))),
    };
    let station_id = match cols.station {
        Some(i) if field(i).is_empty() => return Rejected(IssueKind::Malformed, "empty station_id".into()),
        Some(i) => field(i).to_string(),
        None => format!("grid_{}_{}", field(cols.lat), field(cols.lon)),
    };
    if let Some(b) = options.bounds {
        if !b.contains(lat, lon) {
            return Rejected(
                IssueKind::OutOfBounds,
                format!("coordinates ({lat}, {lon}) outside bounds"),
            );
        }
    }
    let raw = field(cols.rain);
    let mut issue = None;
    let rainfall_mm = if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
        None
    } else {
        match raw.parse::<f64>() {
            Ok(v) if !v.is_finite() => return Rejected(IssueKind::Malformed, format!("non-finite rainfall `{raw}`")),
            Ok(v) if v < 0.0 => {
                issue = Some((IssueKind::NegativeValue, format!("negative value {raw}")));
                None
            }
            Ok(v) => Some(v),
            Err(_) => return Rejected(IssueKind::Malformed, format!("bad rainfall `{raw}`")),
        }
    };
    let zone = cols.zone.map(field).filter(|z| !z.is_empty()).map(str::to_string);
    let line = row.position().map_or(0, |p| p.line());
    RowOutcome::Record(
        RainfallRecord {
            station_id,
            latitude: lat,
            longitude: lon,
            date,
            rainfall_mm,
            zone,
        },
        issue.map(|(kind, detail)| RowIssue { line, kind, detail }),
    )
}

/// Parses a daily CSV stream. Bad rows never vanish: each one becomes a
/// [`RowIssue`], and more than `max_malformed_fraction` rejected rows fails the
/// whole ingestion.
pub fn ingest_reader(reader: impl Read, format: DailyFormat, options: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = locate_columns(&headers, format)?;
    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for row in rdr.records() {
        let row = row?;
        report.total_rows += 1;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, headers.len(), &cols, options) {
            RowOutcome::Record(rec, issue) => {
                records.push(rec);
                report.issues.extend(issue);
            }
            RowOutcome::Rejected(kind, detail) => report.issues.push(RowIssue { line, kind, detail }),
        }
    }
    let rejected = report.rejected_rows();
    if report.total_rows > 0 && rejected as f64 > options.max_malformed_fraction * report.total_rows as f64 {
        return Err(Error::IngestionFailed {
            malformed: rejected,
            total: report.total_rows,
            report,
        });
    }
    Ok(Ingested { records, report })
}
