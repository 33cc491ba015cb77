//! Sliding-window samples and year-based splits.

use serde::{Deserialize, Serialize};

use super::calendar::{is_monsoon_month, YearMonth, YearRange};
use super::normalize::{fit_normalizer, NormalizationParams};
use super::series::MonthlySeries;
use crate::error::{Error, Result};

/// Nine years of monthly history.
pub const DEFAULT_WINDOW_MONTHS: usize = 108;

/// One example: `window` normalized months (oldest first) followed by the raw
/// latitude and longitude; the target is the normalized rainfall of the next month.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub inputs: Vec<f64>,
    pub target: f64,
    pub station_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub target_month: YearMonth,
}

/// Emits one sample per June–September month that has at least
/// `window_months` months of history in the series. Short series yield nothing.
pub fn build_windows(
    series: &MonthlySeries,
    params: &NormalizationParams,
    window_months: usize,
) -> Result<Vec<WindowSample>> {
    if window_months == 0 {
        return Err(Error::InvalidParameter("window must span at least one month".into()));
    }
    let normalized: Vec<f64> = series.values.iter().map(|&v| params.normalize(v)).collect();
    let mut out = Vec::new();
    for t in window_months..series.len() {
        let ym = series.month_at(t);
        if !is_monsoon_month(ym.month) {
            continue;
        }
        let mut inputs = Vec::with_capacity(window_months + 2);
        inputs.extend_from_slice(&normalized[t - window_months..t]);
        inputs.push(series.latitude);
        inputs.push(series.longitude);
        out.push(WindowSample {
            inputs,
            target: normalized[t],
            station_id: series.station_id.clone(),
            latitude: series.latitude,
            longitude: series.longitude,
            target_month: ym,
        });
    }
    Ok(out)
}

/// Train/validation/test year ranges, assigned by target year.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitYears {
    pub train: YearRange,
    pub validation: YearRange,
    pub test: YearRange,
}

impl SplitYears {
    /// Station protocol: train 1957–1986, validation 1987–1997, test 1998–2017.
    pub const WRD: SplitYears = SplitYears {
        train: YearRange { start: 1957, end: 1986 },
        validation: YearRange { start: 1987, end: 1997 },
        test: YearRange { start: 1998, end: 2017 },
    };

    /// Gridded protocol: train 1901–1980, validation 1981–1995, test 1996–2018.
    pub const IMD: SplitYears = SplitYears {
        train: YearRange { start: 1901, end: 1980 },
        validation: YearRange { start: 1981, end: 1995 },
        test: YearRange { start: 1996, end: 2018 },
    };

    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.validation, self.test];
        for i in 0..3 {
            for j in i + 1..3 {
                if r[i].overlaps(&r[j]) {
                    return Err(Error::Contract(format!("year ranges {} and {} overlap", r[i], r[j])));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<WindowSample>,
    pub validation: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub years: SplitYears,
    /// Samples whose target year fell outside every range.
    pub discarded: usize,
}

pub fn split_by_years(samples: Vec<WindowSample>, years: SplitYears) -> Result<DatasetSplit> {
    years.validate()?;
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        years,
        discarded: 0,
    };
    for s in samples {
        let y = s.target_month.year;
        if years.train.contains(y) {
            split.train.push(s);
        } else if years.validation.contains(y) {
            split.validation.push(s);
        } else if years.test.contains(y) {
            split.test.push(s);
        } else {
            split.discarded += 1;
        }
    }
    Ok(split)
}

/// Normalizer plus split samples, ready for training.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub normalization: NormalizationParams,
    pub split: DatasetSplit,
}

/// Fits the normalizer on every monthly value up to the end of the training
/// years (the only values training windows can see), windows every series,
/// and splits by target year.
pub fn prepare_dataset(series: &[MonthlySeries], years: SplitYears, window_months: usize) -> Result<PreparedData> {
    years.validate()?;
    let visible: Vec<MonthlySeries> = series.iter().map(|s| s.through_year(years.train.end)).collect();
    let normalization = fit_normalizer(&visible)?;
    let mut samples = Vec::new();
    for s in series {
        samples.extend(build_windows(s, &normalization, window_months)?);
    }
    Ok(PreparedData {
        normalization,
        split: split_by_years(samples, years)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(start: YearMonth, n: usize) -> MonthlySeries {
        MonthlySeries::observed("S", 26.5, 74.25, start, (0..n).map(|i| i as f64).collect())
    }

    fn params() -> NormalizationParams {
        NormalizationParams::new(0.0, 1000.0).unwrap()
    }

    #[test]
    fn single_sample_when_109th_month_is_june() {
        let s = series(YearMonth::new(1990, 6).unwrap().plus(-108), 109);
        let w = build_windows(&s, &params(), 108).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].target_month, YearMonth::new(1990, 6).unwrap());
        assert_eq!(w[0].inputs.len(), 110);
        assert_eq!(w[0].inputs[0], 0.0);
        assert!((w[0].inputs[107] - 10.7).abs() < 1e-12);
        assert_eq!(&w[0].inputs[108..], &[26.5, 74.25]);
        assert!((w[0].target - 10.8).abs() < 1e-12);
    }

    #[test]
    fn february_target_never_emitted() {
        let s = series(YearMonth::new(1990, 2).unwrap().plus(-108), 109);
        assert!(build_windows(&s, &params(), 108).unwrap().is_empty());
        let short = series(YearMonth::new(1990, 1).unwrap(), 50);
        assert!(build_windows(&short, &params(), 108).unwrap().is_empty());
    }

    #[test]
    fn split_assignment() {
        let mk = |y, m| WindowSample {
            inputs: vec![],
            target: 0.0,
            station_id: "S".into(),
            latitude: 0.0,
            longitude: 0.0,
            target_month: YearMonth::new(y, m).unwrap(),
        };
        let split = split_by_years(
            vec![mk(1986, 6), mk(1997, 7), mk(1998, 8), mk(1950, 9)],
            SplitYears::WRD,
        )
        .unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.validation.len(), 1);
        assert_eq!(split.validation[0].target_month.year, 1997);
        assert_eq!(split.test.len(), 1);
        assert_eq!(split.discarded, 1);

        let empty = split_by_years(vec![], SplitYears::IMD).unwrap();
        assert!(empty.train.is_empty() && empty.validation.is_empty() && empty.test.is_empty());
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let years = SplitYears {
            validation: "1980:1990".parse().unwrap(),
            ..SplitYears::WRD
        };
        assert!(matches!(split_by_years(vec![], years), Err(Error::Contract(_))));
    }
}
