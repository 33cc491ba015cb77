use serde::{Deserialize, Serialize};

use super::calendar::YearMonth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonthFlag {
    Observed,
    Imputed,
}

impl MonthFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            MonthFlag::Observed => "observed",
            MonthFlag::Imputed => "imputed",
        }
    }
}

/// Gap-free chronological monthly rainfall totals (mm) for one station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub station_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub zone: Option<String>,
    pub start: YearMonth,
    pub values: Vec<f64>,
    pub flags: Vec<MonthFlag>,
}

impl MonthlySeries {
    /// Series with every month flagged as observed.
    pub fn observed(
        station_id: impl Into<String>,
        latitude: f64,
        longitude: f64,
        start: YearMonth,
        values: Vec<f64>,
    ) -> Self {
        let flags = vec![MonthFlag::Observed; values.len()];
        Self {
            station_id: station_id.into(),
            latitude,
            longitude,
            zone: None,
            start,
            values,
            flags,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn month_at(&self, index: usize) -> YearMonth {
        self.start.plus(index as i64)
    }

    /// Last month covered, if any.
    pub fn end(&self) -> Option<YearMonth> {
        (!self.values.is_empty()).then(|| self.month_at(self.values.len() - 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = (YearMonth, f64, MonthFlag)> + '_ {
        self.values
            .iter()
            .zip(&self.flags)
            .enumerate()
            .map(|(i, (&v, &f))| (self.month_at(i), v, f))
    }

    /// The prefix of the series up to and including December of `year`.
    pub fn through_year(&self, year: i32) -> MonthlySeries {
        let keep = self.iter().take_while(|(ym, _, _)| ym.year <= year).count();
        MonthlySeries {
            values: self.values[..keep].to_vec(),
            flags: self.flags[..keep].to_vec(),
            ..self.clone()
        }
    }
}
