//! Trains the three architectures on one dataset and tabulates their errors.
//!
//! A reduced network keeps this quick; the `compare` command runs the full one.

use monsoon::data::{generate_synthetic, prepare_dataset, SplitYears, SynthConfig};
use monsoon::eval::{per_month_metrics, prediction_records, MetricUnit};
use monsoon::models::{ModelKind, ModelSpec};
use monsoon::optim::{train, TrainConfig};

fn main() -> monsoon::Result<()> {
    let synth = SynthConfig {
        stations: 8,
        ..SynthConfig::default()
    };
    let series = generate_synthetic(&synth, 42)?;
    let data = prepare_dataset(&series, SplitYears::WRD, 108)?;
    let cfg = TrainConfig {
        epochs: 15,
        seed: 3,
        ..TrainConfig::default()
    };

    let mut records = Vec::new();
    for kind in ModelKind::ALL {
        let (model, history) = train(
            &ModelSpec::new(kind),
            &data.split.train,
            &data.split.validation,
            data.normalization,
            &cfg,
        )?;
        println!(
            "{kind}: {} parameters, kept epoch {:?}",
            model.model().parameter_count(),
            history.best_epoch
        );
        records.extend(prediction_records(&model, &data.split.test)?);
    }
    for unit in [MetricUnit::Normalized, MetricUnit::Mm] {
        println!("\n{} scale", unit.as_str());
        print!("{}", per_month_metrics(&records, unit)?.to_csv());
    }
    Ok(())
}
