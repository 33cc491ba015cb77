//! Cleaning daily records and aggregating them into monthly series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::calendar::{YearMonth, MONTH_NAMES};
use super::ingest::{RainfallRecord, RowIssue};
use super::series::{MonthFlag, MonthlySeries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanPolicy {
    /// A month with at most this many missing days is summed over its observed days.
    pub max_missing_days: u32,
    /// Stations with a larger share of imputed months are excluded.
    pub max_imputed_fraction: f64,
    /// Stations shorter than this after cleaning are excluded.
    pub min_years: u32,
}

impl Default for CleanPolicy {
    fn default() -> Self {
        Self {
            max_missing_days: 5,
            max_imputed_fraction: 0.10,
            min_years: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationReport {
    pub station_id: String,
    pub first_month: YearMonth,
    pub months: usize,
    pub imputed_months: usize,
    pub observed_days: usize,
    pub missing_days: usize,
    pub duplicate_days: usize,
    /// Sum of daily readings over months kept as observed.
    pub observed_total_mm: f64,
    /// Sum of climatological values written into imputed months.
    pub imputed_total_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub station_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub stations: Vec<StationReport>,
    pub excluded: Vec<Exclusion>,
    /// Row-level problems carried over from ingestion.
    pub row_issues: Vec<RowIssue>,
}

impl CleaningReport {
    pub fn imputed_months(&self) -> usize {
        self.stations.iter().map(|s| s.imputed_months).sum()
    }

    pub fn station(&self, id: &str) -> Option<&StationReport> {
        self.stations.iter().find(|s| s.station_id == id)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

struct MonthTally {
    sum: f64,
    observed_days: u32,
}

/// Aggregates daily records to monthly totals per station.
///
/// Missing or negative-marked days count as missing. A month with no more
/// than `max_missing_days` missing days keeps the sum of its observed days;
/// any other month is filled with the station's mean for that calendar month
/// over its observed months. Stations are returned in station-id order.
pub fn clean_and_aggregate(records: &[RainfallRecord], policy: &CleanPolicy) -> (Vec<MonthlySeries>, CleaningReport) {
    let mut by_station: BTreeMap<&str, Vec<&RainfallRecord>> = BTreeMap::new();
    for r in records {
        by_station.entry(&r.station_id).or_default().push(r);
    }

    let mut report = CleaningReport::default();
    let mut out = Vec::new();
    for (id, mut recs) in by_station {
        recs.sort_by_key(|r| r.date);
        match aggregate_station(id, &recs, policy) {
            Ok((series, station_report)) => {
                out.push(series);
                report.stations.push(station_report);
            }
            Err(reason) => report.excluded.push(Exclusion {
                station_id: id.to_string(),
                reason,
            }),
        }
    }
    (out, report)
}

fn aggregate_station(
    id: &str,
    recs: &[&RainfallRecord],
    policy: &CleanPolicy,
) -> Result<(MonthlySeries, StationReport), String> {
    let first = recs.first().ok_or("no records")?;
    let start = YearMonth::of(first.date);
    let end = YearMonth::of(recs[recs.len() - 1].date);
    let n_months = start.months_until(end) as usize + 1;

    let mut tallies: Vec<MonthTally> = (0..n_months)
        .map(|_| MonthTally {
            sum: 0.0,
            observed_days: 0,
        })
        .collect();
    let mut duplicate_days = 0;
    let mut prev_date = None;
    for r in recs {
        if prev_date == Some(r.date) {
            duplicate_days += 1;
            continue;
        }
        prev_date = Some(r.date);
        if let Some(v) = r.rainfall_mm {
            let t = &mut tallies[start.months_until(YearMonth::of(r.date)) as usize];
            t.sum += v;
            t.observed_days += 1;
        }
    }

    let complete: Vec<bool> = tallies
        .iter()
        .enumerate()
        .map(|(i, t)| start.plus(i as i64).days() - t.observed_days <= policy.max_missing_days)
        .collect();

    let mut clim_sum = [0.0; 12];
    let mut clim_n = [0usize; 12];
    for (i, t) in tallies.iter().enumerate() {
        if complete[i] {
            let m = start.plus(i as i64).month as usize - 1;
            clim_sum[m] += t.sum;
            clim_n[m] += 1;
        }
    }

    let mut values = Vec::with_capacity(n_months);
    let mut flags = Vec::with_capacity(n_months);
    let mut observed_total = 0.0;
    let mut imputed_total = 0.0;
    for (i, t) in tallies.iter().enumerate() {
        if complete[i] {
            values.push(t.sum);
            flags.push(MonthFlag::Observed);
            observed_total += t.sum;
        } else {
            let m = start.plus(i as i64).month as usize - 1;
            if clim_n[m] == 0 {
                return Err(format!(
                    "no observed {} to impute {} from",
                    MONTH_NAMES[m],
                    start.plus(i as i64)
                ));
            }
            let clim = clim_sum[m] / clim_n[m] as f64;
            values.push(clim);
            flags.push(MonthFlag::Imputed);
            imputed_total += clim;
        }
    }

    let imputed = flags.iter().filter(|&&f| f == MonthFlag::Imputed).count();
    if imputed as f64 > policy.max_imputed_fraction * n_months as f64 {
        return Err(format!(
            "{imputed} of {n_months} months imputed (limit {:.0}%)",
            policy.max_imputed_fraction * 100.0
        ));
    }
    let min_months = policy.min_years as usize * 12;
    if n_months < min_months {
        return Err(format!(
            "only {n_months} months of data (< {min_months}); no window can be built"
        ));
    }

    let observed_days: usize = tallies.iter().map(|t| t.observed_days as usize).sum();
    let total_days: usize = (0..n_months).map(|i| start.plus(i as i64).days() as usize).sum();
    let station_report = StationReport {
        station_id: id.to_string(),
        first_month: start,
        months: n_months,
        imputed_months: imputed,
        observed_days,
        missing_days: total_days - observed_days,
        duplicate_days,
        observed_total_mm: observed_total,
        imputed_total_mm: imputed_total,
    };
    let series = MonthlySeries {
        station_id: id.to_string(),
        latitude: first.latitude,
        longitude: first.longitude,
        zone: first.zone.clone(),
        start,
        values,
        flags,
    };
    Ok((series, station_report))
}
