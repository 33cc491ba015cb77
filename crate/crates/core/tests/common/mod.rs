#![allow(dead_code)]

use std::collections::BTreeMap;

use monsoon::data::{
    generate_synthetic, prepare_dataset, DailySynthConfig, PreparedData, RainfallRecord, SplitYears, SynthConfig,
    WindowSample, YearMonth,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `out[f][p] = bias[f] + Σ_c Σ_k kernel[f][c][k] · input[c][p + k]`.
pub fn naive_conv(input: &[Vec<f64>], kernel: &[Vec<Vec<f64>>], bias: &[f64]) -> Vec<Vec<f64>> {
    let len = input[0].len();
    let k_len = kernel[0][0].len();
    let mut out = Vec::new();
    for (f, kf) in kernel.iter().enumerate() {
        let mut row = Vec::new();
        for p in 0..=len - k_len {
            let mut acc = bias[f];
            for (c, kc) in kf.iter().enumerate() {
                for (k, w) in kc.iter().enumerate() {
                    acc += w * input[c][p + k];
                }
            }
            row.push(acc);
        }
        out.push(row);
    }
    out
}

pub fn naive_dense(weights: &[Vec<f64>], bias: &[f64], x: &[f64], relu: bool) -> Vec<f64> {
    weights
        .iter()
        .zip(bias)
        .map(|(row, b)| {
            let mut acc = *b;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            if relu {
                acc.max(0.0)
            } else {
                acc
            }
        })
        .collect()
}

pub fn naive_gap(maps: &[Vec<f64>]) -> Vec<f64> {
    maps.iter()
        .map(|row| {
            let mut acc = 0.0;
            for v in row {
                acc += v;
            }
            acc / row.len() as f64
        })
        .collect()
}

/// Default 30-station network split by the station protocol.
pub fn default_dataset(seed: u64) -> PreparedData {
    let series = generate_synthetic(&SynthConfig::default(), seed).unwrap();
    prepare_dataset(&series, SplitYears::WRD, 108).unwrap()
}

pub fn small_samples(n: usize) -> Vec<WindowSample> {
    default_dataset(42).split.train.into_iter().take(n).collect()
}

/// Windows drawn uniformly from the normalized range, with coordinates inside
/// the study region and random targets.
pub fn random_samples(n: usize, seed: u64) -> Vec<WindowSample> {
    let mut rng = rng(seed);
    (0..n)
        .map(|_| {
            let mut inputs = uniform_vec(&mut rng, 108, 0.0, 100.0);
            let (lat, lon) = (rng.random_range(23.1..30.2), rng.random_range(69.5..78.3));
            inputs.extend([lat, lon]);
            WindowSample {
                inputs,
                target: rng.random_range(0.0..100.0),
                station_id: "RAND".into(),
                latitude: lat,
                longitude: lon,
                target_month: YearMonth::new(2000, 7).unwrap(),
            }
        })
        .collect()
}

pub fn daily_config() -> DailySynthConfig {
    DailySynthConfig::default()
}

/// Station → month → observed daily sum, accumulated in date order.
pub fn daily_month_sums(records: &[RainfallRecord]) -> BTreeMap<String, BTreeMap<YearMonth, f64>> {
    let mut sorted: Vec<&RainfallRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.station_id, a.date).cmp(&(&b.station_id, b.date)));
    let mut out: BTreeMap<String, BTreeMap<YearMonth, f64>> = BTreeMap::new();
    for r in sorted {
        let e = out
            .entry(r.station_id.clone())
            .or_default()
            .entry(YearMonth::of(r.date))
            .or_insert(0.0);
        if let Some(v) = r.rainfall_mm {
            *e += v;
        }
    }
    out
}
