//! Trains the deep and wide model and splits one prediction into its paths.
//!
//! `cargo run --release --example train_dwmrpm -- 30` trains for 30 epochs.

use monsoon::data::{generate_synthetic, prepare_dataset, SplitYears, SynthConfig};
use monsoon::models::ModelSpec;
use monsoon::optim::{evaluate_mse, train, TrainConfig};

fn main() -> monsoon::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let series = generate_synthetic(&SynthConfig::default(), 42)?;
    let data = prepare_dataset(&series, SplitYears::WRD, 108)?;
    let cfg = TrainConfig {
        epochs,
        seed: 1,
        ..TrainConfig::default()
    };
    let (trained, history) = train(
        &ModelSpec::dwmrpm(),
        &data.split.train,
        &data.split.validation,
        data.normalization,
        &cfg,
    )?;

    for r in history.epochs.iter().step_by((epochs / 10).max(1)) {
        println!(
            "epoch {:>3}  train {:>8.3}  val {:>8.3}",
            r.epoch,
            r.train_mse,
            r.val_mse.unwrap_or(f64::NAN)
        );
    }
    let model = trained.model();
    println!(
        "kept epoch {:?}; {} parameters; test MSE {:.3}",
        history.best_epoch,
        model.parameter_count(),
        evaluate_mse(model, &data.split.test)?
    );

    let sample = &data.split.test[0];
    let head = model.joint_head().expect("dwmrpm has a joint head");
    let (wide, deep) = model.sub_paths(&sample.inputs)?;
    let dot = |k: &[f64], h: &[f64]| k.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
    let from_wide = dot(head.k_cn.data(), &wide.unwrap_or_default());
    let from_deep = dot(head.k_d.data(), &deep.unwrap_or_default());
    let p = trained.predict(sample)?;
    println!(
        "{} {}: wide {from_wide:.3} + deep {from_deep:.3} + bias {:.3} = {:.3} ({:.1} mm, observed {:.1} mm)",
        sample.station_id,
        sample.target_month,
        head.bias,
        p.normalized,
        p.mm,
        trained.normalization().denormalize(sample.target)
    );
    Ok(())
}
