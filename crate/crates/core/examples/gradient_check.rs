//! Finite-difference check of every parameter tensor of the three models.

use std::time::Instant;

use monsoon::data::{generate_synthetic, prepare_dataset, SplitYears, SynthConfig};
use monsoon::gradcheck::{check_gradients, GradCheckOptions};
use monsoon::models::{build_model, ModelSpec};

fn main() -> monsoon::Result<()> {
    let series = generate_synthetic(&SynthConfig::default(), 42)?;
    let data = prepare_dataset(&series, SplitYears::WRD, 108)?;
    let samples = &data.split.train[..5];
    for spec in [ModelSpec::dwmrpm(), ModelSpec::mlp(), ModelSpec::cnn1d()] {
        let spec = spec.with_seed(7);
        let mut model = build_model(&spec)?;
        let started = Instant::now();
        let report = check_gradients(&mut model, samples, &GradCheckOptions::default())?;
        println!(
            "{} ({} entries compared, {} skipped at ReLU kinks, {} failures, {:.1?})",
            spec.kind,
            report.checked(),
            report.kinks(),
            report.failures(),
            started.elapsed()
        );
        for t in &report.tensors {
            println!(
                "  {:<22} {:>6}/{:<6} max rel err {:.2e} (analytic {:.6e}, numeric {:.6e})",
                t.name, t.checked, t.total, t.max_rel_error, t.worst_analytic, t.worst_numeric
            );
        }
    }
    Ok(())
}
