use serde::{Deserialize, Serialize};

use super::series::MonthlySeries;
use crate::error::{Error, Result};

/// Min-max scaling of rainfall onto `[0, 100]`: `I* = (I - I_min) / (I_max - I_min) × 100`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    i_min: f64,
    i_max: f64,
}

impl NormalizationParams {
    pub fn new(i_min: f64, i_max: f64) -> Result<Self> {
        if !i_min.is_finite() || !i_max.is_finite() {
            return Err(Error::InvalidParameter("normalization bounds must be finite".into()));
        }
        if i_max == i_min {
            return Err(Error::DegenerateRange(i_min));
        }
        if i_max < i_min {
            return Err(Error::InvalidParameter(format!("I_max {i_max} is below I_min {i_min}")));
        }
        Ok(Self { i_min, i_max })
    }

    pub fn i_min(&self) -> f64 {
        self.i_min
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    pub fn range(&self) -> f64 {
        self.i_max - self.i_min
    }

    /// Values outside the fitted range map outside `[0, 100]`; nothing is clamped.
    pub fn normalize(&self, mm: f64) -> f64 {
        (mm - self.i_min) / self.range() * 100.0
    }

    pub fn denormalize(&self, normalized: f64) -> f64 {
        normalized / 100.0 * self.range() + self.i_min
    }

    /// Stable identifier of the exact bounds.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}{:016x}", self.i_min.to_bits(), self.i_max.to_bits())
    }
}

/// Global min and max over every monthly value of the given (training) series.
pub fn fit_normalizer(train_series: &[MonthlySeries]) -> Result<NormalizationParams> {
    let mut values = train_series.iter().flat_map(|s| s.values.iter().copied());
    let first = values
        .next()
        .ok_or_else(|| Error::Contract("cannot fit a normalizer without values".into()))?;
    let (lo, hi) = values.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    NormalizationParams::new(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::calendar::YearMonth;

    #[test]
    fn endpoints_and_midpoint() {
        let p = NormalizationParams::new(0.0, 800.0).unwrap();
        assert_eq!(p.normalize(0.0), 0.0);
        assert_eq!(p.normalize(800.0), 100.0);
        assert_eq!(p.normalize(400.0), 50.0);
        assert!(p.normalize(900.0) > 100.0);
    }

    #[test]
    fn fit_extremes_and_degenerate() {
        let ym = YearMonth::new(2000, 1).unwrap();
        let s = MonthlySeries::observed("A", 26.0, 75.0, ym, (0..=800).map(f64::from).collect());
        let p = fit_normalizer(&[s]).unwrap();
        assert_eq!((p.i_min(), p.i_max()), (0.0, 800.0));

        let flat = MonthlySeries::observed("B", 26.0, 75.0, ym, vec![5.0; 24]);
        assert!(matches!(fit_normalizer(&[flat]), Err(Error::DegenerateRange(v)) if v == 5.0));
        assert!(matches!(fit_normalizer(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn round_trip_on_random_values() {
        use rand::Rng;
        let p = NormalizationParams::new(3.7, 905.0).unwrap();
        let mut rng = crate::rng::stream(5, &[]);
        let worst = (0..10_000)
            .map(|_| rng.random_range(-100.0..2000.0))
            .map(|v: f64| (p.denormalize(p.normalize(v)) - v).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}
