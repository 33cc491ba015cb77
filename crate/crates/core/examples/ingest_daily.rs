//! Writes a synthetic daily gauge file, ingests it and aggregates to months.

use monsoon::data::{
    clean_and_aggregate, generate_synthetic_daily, ingest_daily, write_daily_csv, CleanPolicy, DailyFormat,
    DailySynthConfig,
};

fn main() -> monsoon::Result<()> {
    let records = generate_synthetic_daily(&DailySynthConfig::default(), 7)?;
    let dir = tempfile::tempdir().map_err(|e| monsoon::Error::io("tempdir", e))?;
    let path = dir.path().join("daily.csv");
    let file = std::fs::File::create(&path).map_err(|e| monsoon::Error::io(&path, e))?;
    write_daily_csv(std::io::BufWriter::new(file), &records)?;

    let ingested = ingest_daily(&path, DailyFormat::WrdStation)?;
    println!(
        "{} rows read, {} records, {} row issues",
        ingested.report.total_rows,
        ingested.records.len(),
        ingested.report.issues.len()
    );
    for issue in ingested.report.issues.iter().take(3) {
        println!("  {issue:?}");
    }

    let (series, report) = clean_and_aggregate(&ingested.records, &CleanPolicy::default());
    for s in &report.stations {
        println!(
            "{}: {} months, {} imputed, {} missing days, {:.1} mm observed + {:.1} mm imputed",
            s.station_id, s.months, s.imputed_months, s.missing_days, s.observed_total_mm, s.imputed_total_mm
        );
    }
    for e in &report.excluded {
        println!("{} excluded: {}", e.station_id, e.reason);
    }
    let total: f64 = series.iter().flat_map(|s| &s.values).sum();
    println!("monthly total across stations: {total:.1} mm");
    Ok(())
}
