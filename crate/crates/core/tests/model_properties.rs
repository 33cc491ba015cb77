mod common;

use monsoon::models::{build_model, ModelSpec, TrainedModel};
use monsoon::optim::{train, TrainConfig};

fn trained_dwmrpm() -> (TrainedModel, Vec<monsoon::data::WindowSample>) {
    let data = common::default_dataset(42);
    let samples: Vec<_> = data.split.train.iter().take(32).cloned().collect();
    let cfg = TrainConfig {
        epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let (model, _) = train(&ModelSpec::dwmrpm(), &samples, &[], data.normalization, &cfg).unwrap();
    (model, samples)
}

#[test]
fn output_is_the_joint_head_over_recomputed_paths() {
    let (trained, samples) = trained_dwmrpm();
    let model = trained.model();
    let head = model.joint_head().unwrap();
    let preds = model.predict_samples(&samples).unwrap();
    for (s, p) in samples.iter().zip(preds) {
        let (wide, deep) = model.sub_paths(&s.inputs).unwrap();
        let dot = |k: &[f64], h: &[f64]| k.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        let joint = dot(head.k_cn.data(), &wide.unwrap()) + dot(head.k_d.data(), &deep.unwrap()) + head.bias;
        assert!((joint - p).abs() < 1e-12, "{joint} vs {p}");
    }
}

#[test]
fn repeated_eval_predictions_are_bit_identical() {
    let (trained, samples) = trained_dwmrpm();
    let first = trained.predict(&samples[0]).unwrap();
    for _ in 0..1000 {
        let p = trained.predict(&samples[0]).unwrap();
        assert_eq!(p.normalized.to_bits(), first.normalized.to_bits());
    }
}

#[test]
fn every_input_month_reaches_the_wide_path() {
    let model = build_model(&ModelSpec::dwmrpm()).unwrap();
    let base = common::random_samples(1, 3).remove(0).inputs;
    let (h0, _) = model.sub_paths(&base).unwrap();
    let h0 = h0.unwrap();
    for month in 0..108 {
        let mut bumped = base.clone();
        bumped[month] += 1.0;
        let (h1, _) = model.sub_paths(&bumped).unwrap();
        assert_ne!(h1.unwrap(), h0, "month {month} does not reach h_cn");
    }
}

#[test]
fn all_models_take_the_same_encoding() {
    let sample = common::random_samples(1, 4).remove(0);
    assert_eq!(sample.inputs.len(), 110);
    for spec in [ModelSpec::dwmrpm(), ModelSpec::mlp(), ModelSpec::cnn1d()] {
        let model = build_model(&spec).unwrap();
        assert_eq!(model.predict_inputs(&[&sample.inputs]).unwrap().len(), 1);
        assert!(model.predict_inputs(&[&sample.inputs[..109]]).is_err());
    }
}

#[test]
fn saved_models_reload_bit_exactly() {
    let (trained, samples) = trained_dwmrpm();
    let text = trained.to_json().unwrap();
    let back = TrainedModel::from_json(&text).unwrap();
    assert_eq!(back, trained);
    let a = trained.predict_all(&samples).unwrap();
    let b = back.predict_all(&samples).unwrap();
    assert!(a
        .iter()
        .zip(&b)
        .all(|(x, y)| x.normalized.to_bits() == y.normalized.to_bits()));
}

#[test]
fn inference_is_shareable_across_threads() {
    let (trained, samples) = trained_dwmrpm();
    let expected = trained.predict_all(&samples).unwrap();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| s.spawn(|| trained.predict_all(&samples).unwrap()))
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    });
}
