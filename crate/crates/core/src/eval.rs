//! Error metrics per monsoon month, monthly climatology summaries, and
//! report writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{
    is_monsoon_month, MonthlySeries, NormalizationParams, WindowSample, YearMonth, MONSOON_MONTHS, MONTH_NAMES,
};
use crate::error::{Error, Result};
use crate::models::{ModelKind, TrainedModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricUnit {
    Normalized,
    Mm,
}

impl std::str::FromStr for MetricUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(MetricUnit::Normalized),
            "mm" => Ok(MetricUnit::Mm),
            _ => Err(Error::Parse(format!("unknown unit `{s}`"))),
        }
    }
}

impl MetricUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricUnit::Normalized => "normalized",
            MetricUnit::Mm => "mm",
        }
    }

    pub fn other(self) -> Self {
        match self {
            MetricUnit::Normalized => MetricUnit::Mm,
            MetricUnit::Mm => MetricUnit::Normalized,
        }
    }
}

fn check_pairs(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::Contract("metrics need at least one pair".into()));
    }
    if actual.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// `sqrt((1/N) Σ (y - ŷ)²)`.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pairs(actual, predicted)?;
    let sse: f64 = actual.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok((sse / actual.len() as f64).sqrt())
}

/// `(1/N) Σ |y - ŷ|`.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pairs(actual, predicted)?;
    let sae: f64 = actual.iter().zip(predicted).map(|(y, p)| (y - p).abs()).sum();
    Ok(sae / actual.len() as f64)
}

/// One prediction next to its observation, on both scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub station_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub target: YearMonth,
    pub actual_normalized: f64,
    pub actual_mm: f64,
    pub predicted_normalized: f64,
    pub predicted_mm: f64,
    pub model: ModelKind,
    pub normalization: NormalizationParams,
}

impl PredictionRecord {
    fn pair(&self, unit: MetricUnit) -> (f64, f64) {
        match unit {
            MetricUnit::Normalized => (self.actual_normalized, self.predicted_normalized),
            MetricUnit::Mm => (self.actual_mm, self.predicted_mm),
        }
    }
}

/// Runs `model` over `samples` and pairs each prediction with its target.
pub fn prediction_records(model: &TrainedModel, samples: &[WindowSample]) -> Result<Vec<PredictionRecord>> {
    let norm = *model.normalization();
    let preds = model.predict_all(samples)?;
    Ok(samples
        .iter()
        .zip(preds)
        .map(|(s, p)| PredictionRecord {
            station_id: s.station_id.clone(),
            latitude: s.latitude,
            longitude: s.longitude,
            target: s.target_month,
            actual_normalized: s.target,
            actual_mm: norm.denormalize(s.target),
            predicted_normalized: p.normalized,
            predicted_mm: p.mm,
            model: model.spec().kind,
            normalization: norm,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Month(u32),
    Overall,
}

impl Period {
    pub fn label(self) -> &'static str {
        match self {
            Period::Month(m) => MONTH_NAMES[m as usize - 1],
            Period::Overall => "Overall",
        }
    }

    /// June, July, August, September, Overall.
    pub fn report_order() -> [Period; 5] {
        [
            Period::Month(MONSOON_MONTHS[0]),
            Period::Month(MONSOON_MONTHS[1]),
            Period::Month(MONSOON_MONTHS[2]),
            Period::Month(MONSOON_MONTHS[3]),
            Period::Overall,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub period: Period,
    pub model: ModelKind,
    pub count: usize,
    pub rmse: f64,
    pub mae: f64,
}

impl MetricsRow {
    pub fn mse(&self) -> f64 {
        self.rmse * self.rmse
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub unit: MetricUnit,
    pub models: Vec<ModelKind>,
    /// Ordered by period (June … September, Overall), then model.
    pub rows: Vec<MetricsRow>,
    /// (period, model) groups with no records.
    pub omitted: Vec<(Period, ModelKind)>,
}

/// Groups records by monsoon month and model. `Overall` pools every record of
/// a model; it is not an average of the monthly rows.
pub fn per_month_metrics(records: &[PredictionRecord], unit: MetricUnit) -> Result<MetricsTable> {
    let first = records
        .first()
        .ok_or_else(|| Error::Contract("no prediction records".into()))?;
    if records.iter().any(|r| r.normalization != first.normalization) {
        return Err(Error::Contract(
            "records were produced under different normalizations; their units are not comparable".into(),
        ));
    }
    if let Some(r) = records.iter().find(|r| !is_monsoon_month(r.target.month)) {
        return Err(Error::Contract(format!(
            "record for {} targets {}, outside June–September",
            r.station_id, r.target
        )));
    }

    let mut groups: BTreeMap<(Period, ModelKind), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let (a, p) = r.pair(unit);
        for period in [Period::Month(r.target.month), Period::Overall] {
            let g = groups.entry((period, r.model)).or_default();
            g.0.push(a);
            g.1.push(p);
        }
    }
    let mut models: Vec<ModelKind> = records.iter().map(|r| r.model).collect();
    models.sort();
    models.dedup();

    let mut table = MetricsTable {
        unit,
        models: models.clone(),
        rows: Vec::new(),
        omitted: Vec::new(),
    };
    for period in Period::report_order() {
        for &model in &models {
            match groups.get(&(period, model)) {
                Some((a, p)) => table.rows.push(MetricsRow {
                    period,
                    model,
                    count: a.len(),
                    rmse: rmse(a, p)?,
                    mae: mae(a, p)?,
                }),
                None => table.omitted.push((period, model)),
            }
        }
    }
    Ok(table)
}

impl MetricsTable {
    pub fn get(&self, period: Period, model: ModelKind) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.period == period && r.model == model)
    }

    /// Periods that have at least one row, in report order.
    pub fn periods(&self) -> Vec<Period> {
        Period::report_order()
            .into_iter()
            .filter(|p| self.rows.iter().any(|r| r.period == *p))
            .collect()
    }

    /// `Month,<MODEL> RMSE,<MODEL> MAE,...`, one line per period, four decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Month");
        for m in &self.models {
            let _ = write!(out, ",{m} RMSE,{m} MAE");
        }
        out.push('\n');
        for period in self.periods() {
            out.push_str(period.label());
            for &m in &self.models {
                match self.get(period, m) {
                    Some(r) => {
                        let _ = write!(out, ",{:.4},{:.4}", r.rmse, r.mae);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Merges tables for different models that share a unit.
    pub fn join(tables: &[MetricsTable]) -> Result<MetricsTable> {
        let first = tables
            .first()
            .ok_or_else(|| Error::Contract("nothing to join".into()))?;
        if tables.iter().any(|t| t.unit != first.unit) {
            return Err(Error::Contract("cannot join tables with different units".into()));
        }
        let mut models: Vec<ModelKind> = tables.iter().flat_map(|t| t.models.iter().copied()).collect();
        models.sort();
        models.dedup();
        let mut rows: Vec<MetricsRow> = tables.iter().flat_map(|t| t.rows.iter().cloned()).collect();
        rows.sort_by_key(|r| (r.period, r.model));
        let mut omitted: Vec<_> = tables.iter().flat_map(|t| t.omitted.iter().copied()).collect();
        omitted.sort();
        Ok(MetricsTable {
            unit: first.unit,
            models,
            rows,
            omitted,
        })
    }
}

pub fn predictions_csv(records: &[PredictionRecord]) -> String {
    let mut out = String::from(
        "station_id,latitude,longitude,year,month,model,actual_normalized,predicted_normalized,actual_mm,predicted_mm\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.station_id,
            r.latitude,
            r.longitude,
            r.target.year,
            r.target.month,
            r.model.flag(),
            r.actual_normalized,
            r.predicted_normalized,
            r.actual_mm,
            r.predicted_mm
        );
    }
    out
}

/// Plot-ready `year,month,actual_mm,predicted_mm` tables keyed by station id.
pub fn plot_tables(records: &[PredictionRecord]) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    for r in records {
        let t = out
            .entry(r.station_id.clone())
            .or_insert_with(|| String::from("year,month,actual_mm,predicted_mm\n"));
        let _ = writeln!(
            t,
            "{},{},{},{}",
            r.target.year, r.target.month, r.actual_mm, r.predicted_mm
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthStats {
    pub month: u32,
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonStats {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub years: usize,
}

/// Per-calendar-month climatology of one series plus the June–September
/// seasonal total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub station_id: String,
    pub months: Vec<MonthStats>,
    /// Over years with all four monsoon months present.
    pub season: Option<SeasonStats>,
}

fn stats(values: &[f64]) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, max, min)
}

pub fn statistical_summary(series: &MonthlySeries) -> Result<StatSummary> {
    let mut by_month: Vec<Vec<f64>> = vec![Vec::new(); 12];
    let mut by_year: BTreeMap<i32, Vec<(u32, f64)>> = BTreeMap::new();
    for (ym, v, _) in series.iter() {
        by_month[ym.month as usize - 1].push(v);
        by_year.entry(ym.year).or_default().push((ym.month, v));
    }
    if !by_year.values().any(|months| months.len() == 12) {
        return Err(Error::Contract(format!(
            "series {} does not span a complete calendar year",
            series.station_id
        )));
    }
    let months = by_month
        .iter()
        .enumerate()
        .map(|(i, vals)| {
            let (mean, max, min) = stats(vals);
            MonthStats {
                month: i as u32 + 1,
                mean,
                max,
                min,
                count: vals.len(),
            }
        })
        .collect();
    let totals: Vec<f64> = by_year
        .values()
        .filter(|months| months.iter().filter(|(m, _)| is_monsoon_month(*m)).count() == 4)
        .map(|months| {
            months
                .iter()
                .filter(|(m, _)| is_monsoon_month(*m))
                .map(|(_, v)| v)
                .sum()
        })
        .collect();
    let season = (!totals.is_empty()).then(|| {
        let (mean, max, min) = stats(&totals);
        SeasonStats {
            mean,
            max,
            min,
            years: totals.len(),
        }
    });
    Ok(StatSummary {
        station_id: series.station_id.clone(),
        months,
        season,
    })
}

impl StatSummary {
    pub fn month(&self, month: u32) -> &MonthStats {
        &self.months[month as usize - 1]
    }

    /// `Month,Mean (mm),Maximum (mm),Minimum (mm)`, two decimals, with a
    /// trailing June–September total row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Month,Mean (mm),Maximum (mm),Minimum (mm)\n");
        for m in &self.months {
            let _ = writeln!(
                out,
                "{},{:.2},{:.2},{:.2}",
                &MONTH_NAMES[m.month as usize - 1][..3],
                m.mean,
                m.max,
                m.min
            );
        }
        if let Some(s) = &self.season {
            let _ = writeln!(out, "Season total (Jun-Sep),{:.2},{:.2},{:.2}", s.mean, s.max, s.min);
        }
        out
    }
}
