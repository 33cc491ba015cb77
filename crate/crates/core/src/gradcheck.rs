//! Central finite-difference check of backpropagated gradients.

use rand::seq::index;

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::nn::Mode;
use crate::optim::batch_gradients;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Tensors up to this size are checked in full.
    pub full_check_limit: usize,
    /// Random entries checked in larger tensors.
    pub sampled_entries: usize,
    /// Largest-magnitude entries always checked in larger tensors.
    pub largest_entries: usize,
    pub rel_tolerance: f64,
    /// Entries where both gradients are below this magnitude are compared by
    /// absolute error against the same bound.
    pub small_gradient: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            full_check_limit: 1000,
            sampled_entries: 200,
            largest_entries: 20,
            rel_tolerance: 1e-4,
            small_gradient: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub total: usize,
    pub checked: usize,
    /// Entries whose ±step perturbation moves a ReLU input across zero. The
    /// loss is not differentiable there, so they are left out of the comparison.
    pub kinks: usize,
    pub failures: usize,
    /// Over entries compared by relative error.
    pub max_rel_error: f64,
    pub max_small_abs_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }

    pub fn kinks(&self) -> usize {
        self.tensors.iter().map(|t| t.kinks).sum()
    }

    pub fn failures(&self) -> usize {
        self.tensors.iter().map(|t| t.failures).sum()
    }
}

/// Eval-mode predictions plus the sign pattern of every ReLU input.
fn eval_forward(model: &Model, samples: &[WindowSample]) -> Result<(Vec<f64>, Vec<bool>)> {
    let width = model.spec().input_len;
    let data = samples.iter().flat_map(|s| s.inputs.iter().copied()).collect();
    let mut tape = model.tape();
    let x = tape.input(Tensor::new(vec![samples.len(), width], data)?);
    let mut rng = crate::rng::stream(0, &[]);
    let out = model.forward(&mut tape, x, Mode::Eval, &mut rng)?;
    let pred = tape.value(out.output).data().to_vec();
    Ok((pred, tape.relu_pattern()))
}

/// `(L(p⁺) - L(p⁻)) / 2h` for the batch MSE, with each squared-error
/// difference factored as `(p⁺ - p⁻)(p⁺ + p⁻ - 2t)` to avoid cancellation.
fn central_difference(plus: &[f64], minus: &[f64], samples: &[WindowSample], step: f64) -> f64 {
    let sum: f64 = samples
        .iter()
        .zip(plus.iter().zip(minus))
        .map(|(s, (p, m))| (p - m) * (p + m - 2.0 * s.target))
        .sum();
    sum / (samples.len() as f64 * 2.0 * step)
}

/// Compares eval-mode backpropagated gradients of the batch MSE on `samples`
/// against `(L(θ+h) - L(θ-h)) / 2h`. The model is restored bit for bit.
pub fn check_gradients(
    model: &mut Model,
    samples: &[WindowSample],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if samples.is_empty() {
        return Err(Error::Contract("gradient check needs samples".into()));
    }
    let batch: Vec<&WindowSample> = samples.iter().collect();
    let (_, grads) = batch_gradients(model, &batch, Mode::Eval, 0)?;
    let (_, base_pattern) = eval_forward(model, samples)?;
    let mut report = GradCheckReport::default();
    let ids: Vec<_> = model.params().ids().collect();
    for (t, id) in ids.into_iter().enumerate() {
        let analytic = grads.get(id).data().to_vec();
        let total = analytic.len();
        let entries: Vec<usize> = if total <= opts.full_check_limit {
            (0..total).collect()
        } else {
            let mut rng = crate::rng::stream(opts.seed, &[t as u64]);
            let mut picked = index::sample(&mut rng, total, opts.sampled_entries.min(total)).into_vec();
            let mut by_size: Vec<usize> = (0..total).collect();
            by_size.sort_by(|&a, &b| analytic[b].abs().total_cmp(&analytic[a].abs()));
            picked.extend(by_size.into_iter().take(opts.largest_entries));
            picked.sort_unstable();
            picked.dedup();
            picked
        };
        let mut check = TensorCheck {
            name: model.params().name(id).to_string(),
            total,
            checked: 0,
            kinks: 0,
            failures: 0,
            max_rel_error: 0.0,
            max_small_abs_error: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
        };
        for i in entries {
            let original = model.params().get(id).data()[i];
            model.params_mut().get_mut(id).data_mut()[i] = original + opts.step;
            let (plus, plus_pattern) = eval_forward(model, samples)?;
            model.params_mut().get_mut(id).data_mut()[i] = original - opts.step;
            let (minus, minus_pattern) = eval_forward(model, samples)?;
            model.params_mut().get_mut(id).data_mut()[i] = original;
            if plus_pattern != base_pattern || minus_pattern != base_pattern {
                check.kinks += 1;
                continue;
            }
            check.checked += 1;
            let numeric = central_difference(&plus, &minus, samples, opts.step);
            let a = analytic[i];
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            if scale < opts.small_gradient {
                check.max_small_abs_error = check.max_small_abs_error.max(diff);
                if diff >= opts.small_gradient {
                    check.failures += 1;
                }
                continue;
            }
            let err = diff / scale;
            if err.is_nan() || err >= opts.rel_tolerance {
                check.failures += 1;
            }
            if err > check.max_rel_error || !err.is_finite() {
                check.max_rel_error = err;
                check.worst_index = i;
                check.worst_analytic = analytic[i];
                check.worst_numeric = numeric;
            }
        }
        report.tensors.push(check);
    }
    Ok(report)
}
