//! MSE loss, Adam, and the deterministic mini-batch training loop.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{NormalizationParams, WindowSample};
use crate::error::{Error, Result};
use crate::models::{build_model, Model, ModelSpec, TrainedModel, TrainingMetadata};
use crate::nn::{Gradients, Mode, ParamStore};
use crate::rng::stream;
use crate::tensor::Tensor;

/// `(1/N) Σ (pred_i - target_i)²`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} elements, target {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(crate::nn::mse(pred.data(), target.data()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|p| Tensor::zeros(p.shape()).expect("parameter shapes are valid"))
            .collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }
}

/// One bias-corrected Adam update. Nothing is modified when any gradient is
/// non-finite.
pub fn adam_step(params: &mut ParamStore, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::ShapeMismatch("gradient/parameter count mismatch".into()));
    }
    for id in params.ids() {
        let g = grads.get(id);
        if g.shape() != params.get(id).shape() {
            return Err(Error::ShapeMismatch(format!(
                "gradient for `{}` has shape {:?}",
                params.name(id),
                g.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch: None,
                detail: format!("non-finite gradient for parameter `{}`", params.name(id)),
            });
        }
    }

    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for id in params.ids() {
        let i = id.index();
        let g = grads.get(id).data();
        let p = params.get_mut(id).data_mut();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for j in 0..p.len() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Which epoch's weights `train` returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Lowest validation MSE (training MSE when there is no validation set).
    BestValidation,
    FinalEpoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 8,
            lr: 1e-3,
            seed: 0,
            shuffle: true,
            selection: Selection::BestValidation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches (dropout active),
    /// weighted by batch size.
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest selection metric.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Eval-mode MSE of `model` over `samples`. Leaves the model untouched.
pub fn evaluate_mse(model: &Model, samples: &[WindowSample]) -> Result<f64> {
    let pred = model.predict_samples(samples)?;
    let target: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Ok(crate::nn::mse(&pred, &target))
}

/// Forward and backward on one mini-batch in training mode. Returns the batch
/// loss (mean over the batch) and its gradients.
pub fn batch_gradients(
    model: &Model,
    batch: &[&WindowSample],
    mode: Mode,
    dropout_seed: u64,
) -> Result<(f64, Gradients)> {
    let n = model.spec().input_len;
    let mut data = Vec::with_capacity(batch.len() * n);
    for s in batch {
        if s.inputs.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} inputs, model expects {n}",
                s.inputs.len()
            )));
        }
        data.extend_from_slice(&s.inputs);
    }
    let target = Tensor::from_vec(batch.iter().map(|s| s.target).collect());
    let mut rng = stream(dropout_seed, &[]);
    let mut tape = model.tape();
    let x = tape.input(Tensor::new(vec![batch.len(), n], data)?);
    let out = model.forward(&mut tape, x, mode, &mut rng)?;
    let loss = tape.mse(out.output, &target)?;
    let value = tape.value(loss).data()[0];
    Ok((value, tape.backward(loss)?))
}

fn fingerprint(samples: &[WindowSample]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        for v in s.inputs.iter().chain(std::iter::once(&s.target)) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Jointly optimizes every parameter of a fresh model built from `spec`.
///
/// Each epoch shuffles the training set with a stream keyed by
/// `(cfg.seed, epoch)` and runs Adam over mini-batches (the last partial batch
/// included) with dropout active; validation MSE is then measured with
/// dropout off.
pub fn train(
    spec: &ModelSpec,
    train_set: &[WindowSample],
    val_set: &[WindowSample],
    normalization: NormalizationParams,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainHistory)> {
    if train_set.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    if cfg.batch_size == 0 || cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(Error::InvalidParameter(
            "batch size and learning rate must be positive".into(),
        ));
    }
    let width = train_set[0].inputs.len();
    if let Some(s) = train_set.iter().chain(val_set).find(|s| s.inputs.len() != width) {
        return Err(Error::Contract(format!(
            "sample for {} {} has {} inputs, expected {width}",
            s.station_id,
            s.target_month,
            s.inputs.len()
        )));
    }

    let mut model = build_model(spec)?;
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.sort_unstable();
            order.shuffle(&mut stream(cfg.seed, &[0x5_4F1E, epoch as u64]));
        }
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&WindowSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let seed = crate::rng::derive_seed(cfg.seed, &[0xD80F, epoch as u64, b as u64]);
            let (loss, grads) = batch_gradients(&model, &batch, Mode::Train, seed)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch: Some(epoch),
                    detail: format!("batch {b} loss is {loss}"),
                });
            }
            loss_sum += loss * chunk.len() as f64;
            adam_step(model.params_mut(), &grads, &mut adam).map_err(|e| match e {
                Error::TrainingDiverged { detail, .. } => Error::TrainingDiverged {
                    epoch: Some(epoch),
                    detail,
                },
                other => other,
            })?;
        }

        let train_mse = loss_sum / train_set.len() as f64;
        let val_mse = if val_set.is_empty() {
            None
        } else {
            Some(evaluate_mse(&model, val_set)?)
        };
        let metric = val_mse.unwrap_or(train_mse);
        if !metric.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch: Some(epoch),
                detail: format!("evaluation MSE is {metric}"),
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if best.as_ref().is_none_or(|(m, _)| metric < *m) {
            history.best_epoch = Some(epoch);
            let snapshot = match cfg.selection {
                Selection::BestValidation => model.params().clone(),
                Selection::FinalEpoch => ParamStore::new(),
            };
            best = Some((metric, snapshot));
        }
    }

    let selected_epoch = match cfg.selection {
        Selection::BestValidation => {
            if let Some((_, params)) = &best {
                model.params_mut().copy_from(params)?;
            }
            history.best_epoch
        }
        Selection::FinalEpoch => cfg.epochs.checked_sub(1),
    };
    let metadata = TrainingMetadata {
        seed: cfg.seed,
        epochs: cfg.epochs,
        selected_epoch,
        data_fingerprint: fingerprint(train_set),
    };
    Ok((TrainedModel::new(model, normalization, metadata), history))
}
