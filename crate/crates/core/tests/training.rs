mod common;

use monsoon::data::WindowSample;
use monsoon::models::{build_model, ModelSpec};
use monsoon::nn::Mode;
use monsoon::optim::{adam_step, batch_gradients, evaluate_mse, train, AdamConfig, AdamState, Selection, TrainConfig};
use monsoon::Error;

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

/// Adam's first step moves every parameter by about `lr` against its gradient
/// sign, so the prediction shifts toward the target by `lr·Σ|∂p/∂θ|`. The loss
/// cannot rise unless that shift overshoots past twice the residual.
#[test]
fn one_small_step_descends() {
    let pool = common::small_samples(100);
    let lr = 1e-4;
    let mut in_regime = 0;
    for seed in 0..100u64 {
        let sample = &pool[seed as usize];
        let one = std::slice::from_ref(sample);
        let mut model = build_model(&ModelSpec::dwmrpm().with_seed(seed)).unwrap();
        let p0 = model.predict_samples(one).unwrap()[0];
        let before = evaluate_mse(&model, one).unwrap();
        let (_, grads) = batch_gradients(&model, &[sample], Mode::Eval, seed).unwrap();
        let residual = p0 - sample.target;
        let shift: f64 = grads
            .as_slice()
            .iter()
            .flat_map(|t| t.data())
            .map(|g| lr * (g / (2.0 * residual)).abs())
            .sum();
        let mut state = AdamState::new(
            model.params(),
            AdamConfig {
                lr,
                ..AdamConfig::default()
            },
        );
        adam_step(model.params_mut(), &grads, &mut state).unwrap();
        let p1 = model.predict_samples(one).unwrap()[0];
        let after = evaluate_mse(&model, one).unwrap();
        assert!(
            (p1 - p0) * residual < 0.0,
            "seed {seed}: prediction moved away from the target"
        );
        if shift < 1.8 * residual.abs() {
            in_regime += 1;
            assert!(after <= before, "seed {seed}: {before} -> {after}");
        }
    }
    assert!(in_regime >= 90, "only {in_regime} seeds without overshoot");
}

#[test]
fn validation_does_not_touch_training() {
    let data = common::default_dataset(42);
    let train_set = &data.split.train[..40];
    let cfg = TrainConfig {
        selection: Selection::FinalEpoch,
        ..quick(4, 9)
    };
    let spec = ModelSpec::dwmrpm().with_seed(9);
    let (with_val, h1) = train(&spec, train_set, &data.split.validation[..30], data.normalization, &cfg).unwrap();
    let (without, h2) = train(&spec, train_set, &[], data.normalization, &cfg).unwrap();
    assert_eq!(with_val.model().params(), without.model().params());
    let train_losses =
        |h: &monsoon::optim::TrainHistory| h.epochs.iter().map(|r| r.train_mse.to_bits()).collect::<Vec<_>>();
    assert_eq!(train_losses(&h1), train_losses(&h2));
}

#[test]
fn history_tracks_every_epoch_and_best_is_minimum() {
    let data = common::default_dataset(42);
    let (model, history) = train(
        &ModelSpec::mlp().with_seed(2),
        &data.split.train[..64],
        &data.split.validation[..32],
        data.normalization,
        &quick(6, 2),
    )
    .unwrap();
    assert_eq!(history.len(), 6);
    let best = history.best_epoch.unwrap();
    let min = history
        .epochs
        .iter()
        .filter_map(|r| r.val_mse)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(history.epochs[best].val_mse, Some(min));
    assert_eq!(model.metadata().selected_epoch, Some(best));
    assert_eq!(evaluate_mse(model.model(), &data.split.validation[..32]).unwrap(), min);

    let json: serde_json::Value = serde_json::from_str(&history.to_json().unwrap()).unwrap();
    assert_eq!(json["epochs"].as_array().unwrap().len(), 6);
}

#[test]
fn identical_seeds_train_identically() {
    let data = common::default_dataset(42);
    let run = || {
        train(
            &ModelSpec::dwmrpm().with_seed(4),
            &data.split.train[..48],
            &data.split.validation[..16],
            data.normalization,
            &quick(3, 4),
        )
        .unwrap()
        .0
        .to_json()
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_epochs_return_the_initial_model() {
    let data = common::default_dataset(42);
    let spec = ModelSpec::cnn1d().with_seed(1);
    let (model, history) = train(&spec, &data.split.train[..8], &[], data.normalization, &quick(0, 1)).unwrap();
    assert!(history.is_empty());
    assert_eq!(history.best_epoch, None);
    assert_eq!(model.model().params(), build_model(&spec).unwrap().params());
}

#[test]
fn empty_training_set_is_a_contract_error() {
    let data = common::default_dataset(42);
    let err = train(&ModelSpec::mlp(), &[], &[], data.normalization, &quick(1, 0)).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
}

#[test]
fn overflowing_inputs_report_divergence_with_epoch() {
    let data = common::default_dataset(42);
    let mut bad: Vec<WindowSample> = data.split.train[..4].to_vec();
    bad[0].inputs[10] = 1e300;
    bad[0].target = 1e300;
    let err = train(
        &ModelSpec::mlp().with_seed(0),
        &bad,
        &[],
        data.normalization,
        &quick(2, 0),
    )
    .unwrap_err();
    assert!(matches!(err, Error::TrainingDiverged { epoch: Some(0), .. }), "{err}");
}

#[test]
fn sixteen_samples_are_fit_without_dropout() {
    let samples = common::small_samples(16);
    let data = common::default_dataset(42);
    let spec = ModelSpec {
        dropout_rate: 0.0,
        ..ModelSpec::dwmrpm().with_seed(42)
    };
    let (model, _) = train(&spec, &samples, &samples, data.normalization, &quick(400, 42)).unwrap();
    let mse = evaluate_mse(model.model(), &samples).unwrap();
    assert!(mse < 1e-2, "training MSE {mse}");
}
