//! Synthetic monsoon-shaped rainfall for tests and desk-scale experiments.
//!
//! Each monthly value is `mean[zone][month] × station factor × year anomaly × noise`,
//! where every multiplier is a mean-one log-normal. Dry months (profile mean
//! below `dry_threshold_mm`) are additionally zero-inflated, with surviving
//! values scaled up so the expected value still equals the profile.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::calendar::YearMonth;
use super::ingest::RainfallRecord;
use super::series::MonthlySeries;
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneProfile {
    pub name: String,
    /// Mean monthly rainfall (mm), January first.
    pub monthly_means: [f64; 12],
    pub latitude: (f64, f64),
    pub longitude: (f64, f64),
}

impl ZoneProfile {
    /// Gridded-data shaped profile for eastern stations.
    pub fn east() -> Self {
        Self {
            name: "east".into(),
            monthly_means: [
                4.24, 4.22, 3.81, 2.91, 9.14, 49.67, 159.45, 160.86, 65.38, 9.84, 1.72, 2.31,
            ],
            latitude: (23.1, 30.2),
            longitude: (74.0, 78.3),
        }
    }

    /// Gauge-data shaped profile for western stations.
    pub fn west() -> Self {
        Self {
            name: "west".into(),
            monthly_means: [
                2.20, 2.40, 2.11, 3.78, 5.72, 41.92, 150.54, 166.05, 63.83, 7.31, 4.02, 1.04,
            ],
            latitude: (23.1, 30.2),
            longitude: (69.5, 74.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub stations: usize,
    pub start_year: i32,
    pub years: usize,
    /// Stations are assigned to zones round-robin.
    pub zones: Vec<ZoneProfile>,
    /// Log-sd of the per-month noise.
    pub noise_scale: f64,
    /// Log-sd of the per-station factor.
    pub station_spread: f64,
    /// Log-sd of the per-station yearly anomaly (AR(1) in log space).
    pub interannual_sd: f64,
    pub interannual_persistence: f64,
    /// Probability that a dry month is exactly zero.
    pub dry_zero_prob: f64,
    pub dry_threshold_mm: f64,
}

impl Default for SynthConfig {
    /// 30 stations over 40 years (1968–2007), so every year range of the
    /// station protocol receives target years.
    fn default() -> Self {
        Self {
            stations: 30,
            start_year: 1968,
            years: 40,
            zones: vec![ZoneProfile::east(), ZoneProfile::west()],
            noise_scale: 0.5,
            station_spread: 0.2,
            interannual_sd: 0.25,
            interannual_persistence: 0.6,
            dry_zero_prob: 0.35,
            dry_threshold_mm: 20.0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.stations == 0 || self.years == 0 {
            return Err(Error::Contract("station count and year span must be positive".into()));
        }
        if self.zones.is_empty() {
            return Err(Error::Contract("at least one zone profile is required".into()));
        }
        if !(0.0..1.0).contains(&self.dry_zero_prob) {
            return Err(Error::InvalidParameter("dry_zero_prob must lie in [0, 1)".into()));
        }
        let scales = [self.noise_scale, self.station_spread, self.interannual_sd];
        if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || !(0.0..1.0).contains(&self.interannual_persistence) {
            return Err(Error::InvalidParameter("noise parameters out of range".into()));
        }
        for z in &self.zones {
            if z.monthly_means.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return Err(Error::InvalidParameter(format!("zone {} has a bad mean", z.name)));
            }
        }
        Ok(())
    }
}

/// Mean-one log-normal multiplier.
fn lognormal_unit(sd: f64, rng: &mut impl Rng) -> f64 {
    if sd == 0.0 {
        return 1.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    (sd * z - sd * sd / 2.0).exp()
}

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Vec<MonthlySeries>> {
    cfg.validate()?;
    let start = YearMonth::new(cfg.start_year, 1)?;
    let mut out = Vec::with_capacity(cfg.stations);
    for st in 0..cfg.stations {
        let zone = &cfg.zones[st % cfg.zones.len()];
        let mut rng = stream(seed, &[0x5747, st as u64]);
        let lat = round3(rng.random_range(zone.latitude.0..=zone.latitude.1));
        let lon = round3(rng.random_range(zone.longitude.0..=zone.longitude.1));
        let factor = lognormal_unit(cfg.station_spread, &mut rng);
        let phi = cfg.interannual_persistence;
        let mut anomaly: f64 = StandardNormal.sample(&mut rng);
        let mut values = Vec::with_capacity(cfg.years * 12);
        for _ in 0..cfg.years {
            let s = cfg.interannual_sd;
            let year_mult = if s == 0.0 {
                1.0
            } else {
                (s * anomaly - s * s / 2.0).exp()
            };
            for mean in zone.monthly_means {
                let mut v = mean * factor * year_mult * lognormal_unit(cfg.noise_scale, &mut rng);
                if mean < cfg.dry_threshold_mm && cfg.dry_zero_prob > 0.0 {
                    v = if rng.random::<f64>() < cfg.dry_zero_prob {
                        0.0
                    } else {
                        v / (1.0 - cfg.dry_zero_prob)
                    };
                }
                values.push(v);
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            anomaly = phi * anomaly + (1.0 - phi * phi).sqrt() * z;
        }
        let mut series = MonthlySeries::observed(format!("SYN{st:03}"), lat, lon, start, values);
        series.zone = Some(zone.name.clone());
        out.push(series);
    }
    Ok(out)
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Daily readings with deliberate defects, for exercising ingestion and cleaning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailySynthConfig {
    pub monthly: SynthConfig,
    /// Probability that a day's reading is absent.
    pub missing_day_prob: f64,
    /// Probability that a day's reading is a negative sentinel.
    pub negative_day_prob: f64,
    /// Probability that a day is wet; wet days share the monthly total.
    pub wet_day_prob: f64,
}

impl Default for DailySynthConfig {
    fn default() -> Self {
        Self {
            monthly: SynthConfig {
                stations: 4,
                years: 12,
                ..SynthConfig::default()
            },
            missing_day_prob: 0.01,
            negative_day_prob: 0.002,
            wet_day_prob: 0.3,
        }
    }
}

/// Spreads each synthetic monthly total over wet days (0.1 mm resolution),
/// then knocks out readings at the configured rates.
pub fn generate_synthetic_daily(cfg: &DailySynthConfig, seed: u64) -> Result<Vec<RainfallRecord>> {
    let monthly = generate_synthetic(&cfg.monthly, seed)?;
    let mut out = Vec::new();
    for (si, s) in monthly.iter().enumerate() {
        let mut rng = stream(seed, &[0xDA11, si as u64]);
        for (ym, total, _) in s.iter() {
            let days = ym.days() as usize;
            let weights: Vec<f64> = (0..days)
                .map(|_| {
                    if rng.random::<f64>() < cfg.wet_day_prob {
                        rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let wsum: f64 = weights.iter().sum();
            for (d, w) in weights.iter().enumerate() {
                let amount = if wsum > 0.0 {
                    (total * w / wsum * 10.0).round() / 10.0
                } else {
                    0.0
                };
                let u: f64 = rng.random();
                let reading = if u < cfg.missing_day_prob {
                    None
                } else if u < cfg.missing_day_prob + cfg.negative_day_prob {
                    Some(-1.0)
                } else {
                    Some(amount)
                };
                out.push(RainfallRecord {
                    station_id: s.station_id.clone(),
                    latitude: s.latitude,
                    longitude: s.longitude,
                    date: NaiveDate::from_ymd_opt(ym.year, ym.month, d as u32 + 1).expect("valid day"),
                    rainfall_mm: reading,
                    zone: s.zone.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Writes daily records in the `wrd_station` layout (negative sentinels kept as `-1`).
pub fn write_daily_csv(w: impl std::io::Write, records: &[RainfallRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["station_id", "latitude", "longitude", "date", "rainfall_mm", "zone"])?;
    for r in records {
        wtr.write_record([
            r.station_id.as_str(),
            &r.latitude.to_string(),
            &r.longitude.to_string(),
            &r.date.format("%Y-%m-%d").to_string(),
            &r.rainfall_mm.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            r.zone.as_deref().unwrap_or(""),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<daily csv>", e))?;
    Ok(())
}
