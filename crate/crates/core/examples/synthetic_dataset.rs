//! Builds the default synthetic gauge network and windows it into samples.

use monsoon::data::{generate_synthetic, prepare_dataset, SplitYears, SynthConfig};

fn main() -> monsoon::Result<()> {
    let series = generate_synthetic(&SynthConfig::default(), 42)?;
    println!("{} stations, {} months each", series.len(), series[0].len());

    let data = prepare_dataset(&series, SplitYears::WRD, 108)?;
    let norm = &data.normalization;
    println!("normalizer: I_min {:.1} mm, I_max {:.1} mm", norm.i_min(), norm.i_max());
    let split = &data.split;
    println!(
        "samples: {} train, {} validation, {} test ({} outside every range)",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.discarded
    );

    let s = &split.train[0];
    println!(
        "first sample: {} target {} ({:.2} normalized), {} inputs ending with coordinates {:.3}, {:.3}",
        s.station_id,
        s.target_month,
        s.target,
        s.inputs.len(),
        s.inputs[108],
        s.inputs[109]
    );
    Ok(())
}
