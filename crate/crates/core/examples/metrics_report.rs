//! Station climatology and per-station plot tables from a briefly trained MLP.

use monsoon::data::{generate_synthetic, prepare_dataset, SplitYears, SynthConfig};
use monsoon::eval::{plot_tables, prediction_records, statistical_summary};
use monsoon::models::ModelSpec;
use monsoon::optim::{train, TrainConfig};

fn main() -> monsoon::Result<()> {
    let synth = SynthConfig {
        stations: 4,
        ..SynthConfig::default()
    };
    let series = generate_synthetic(&synth, 11)?;
    let summary = statistical_summary(&series[0])?;
    println!("{}", summary.station_id);
    print!("{}", summary.to_csv());

    let data = prepare_dataset(&series, SplitYears::WRD, 108)?;
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let (model, _) = train(
        &ModelSpec::mlp(),
        &data.split.train,
        &data.split.validation,
        data.normalization,
        &cfg,
    )?;
    let records = prediction_records(&model, &data.split.test)?;
    if let Some((station, table)) = plot_tables(&records).into_iter().next() {
        println!("\n{station}");
        for line in table.lines().take(9) {
            println!("{line}");
        }
    }
    Ok(())
}
