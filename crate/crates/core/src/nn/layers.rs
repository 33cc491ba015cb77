//! Single-sample layer functions. The tape reuses the same kernels for
//! batched, differentiable evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvGeom};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    weights: Tensor,
    bias: Tensor,
    activation: Activation,
}

impl DenseLayer {
    /// `weights` is `[out, in]`, `bias` is `[out]`.
    pub fn new(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let out = match *weights.shape() {
            [out, _] => out,
            ref s => {
                return Err(Error::ShapeMismatch(format!(
                    "dense weights must be [out, in], got {s:?}"
                )))
            }
        };
        if bias.shape() != [out] {
            return Err(Error::ShapeMismatch(format!(
                "dense bias must be [{out}], got {:?}",
                bias.shape()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }
}

/// `out_j = f(Σ_i w_ji·x_i + b_j)` for an input of shape `[in]`.
pub fn dense_forward(layer: &DenseLayer, input: &Tensor) -> Result<Tensor> {
    if input.shape() != [layer.in_dim()] {
        return Err(Error::ShapeMismatch(format!(
            "dense layer expects [{}], got {:?}",
            layer.in_dim(),
            input.shape()
        )));
    }
    let mut y = vec![0.0; layer.out_dim()];
    kernels::dense_forward(
        input.data(),
        1,
        layer.in_dim(),
        layer.weights.data(),
        layer.out_dim(),
        Some(layer.bias.data()),
        &mut y,
    );
    if layer.activation == Activation::Relu {
        y.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Tensor::new(vec![layer.out_dim()], y)
}

/// Valid, stride-1 convolution (cross-correlation, no kernel flip).
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dLayer {
    kernels: Tensor,
    biases: Tensor,
}

impl Conv1dLayer {
    /// `kernels` is `[filters, kernel_len]` for a single input channel or
    /// `[filters, channels, kernel_len]`; `biases` is `[filters]`.
    pub fn new(kernels: Tensor, biases: Tensor) -> Result<Self> {
        let kernels = match *kernels.shape() {
            [f, k] => kernels.reshape(vec![f, 1, k])?,
            [_, _, _] => kernels,
            ref s => {
                return Err(Error::ShapeMismatch(format!(
                    "conv kernels must be rank 2 or 3, got {s:?}"
                )))
            }
        };
        let filters = kernels.shape()[0];
        if biases.shape() != [filters] {
            return Err(Error::ShapeMismatch(format!(
                "conv biases must be [{filters}], got {:?}",
                biases.shape()
            )));
        }
        Ok(Self { kernels, biases })
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if input_len < self.kernel_len() {
            return Err(Error::ShapeMismatch(format!(
                "input length {input_len} shorter than kernel length {}",
                self.kernel_len()
            )));
        }
        Ok(input_len - self.kernel_len() + 1)
    }
}

/// `output[k][p] = bias[k] + Σ_{c,j} kernel[k][c][j]·input[c][p + j]`.
///
/// `input` is `[len]` (one channel) or `[channels, len]`; the result is
/// `[filters, len - kernel_len + 1]`.
pub fn conv1d_forward(layer: &Conv1dLayer, input: &Tensor) -> Result<Tensor> {
    let (channels, len) = match *input.shape() {
        [l] => (1, l),
        [c, l] => (c, l),
        ref s => {
            return Err(Error::ShapeMismatch(format!(
                "conv input must be [len] or [channels, len], got {s:?}"
            )))
        }
    };
    if channels != layer.channels() {
        return Err(Error::ShapeMismatch(format!(
            "conv layer expects {} channels, got {channels}",
            layer.channels()
        )));
    }
    let out_len = layer.output_len(len)?;
    let geom = ConvGeom {
        channels,
        len,
        filters: layer.filters(),
        kernel: layer.kernel_len(),
    };
    let mut y = vec![0.0; layer.filters() * out_len];
    kernels::conv_forward(geom, 1, input.data(), layer.kernels.data(), layer.biases.data(), &mut y);
    Tensor::new(vec![layer.filters(), out_len], y)
}

/// `[filters, positions] → [filters]`, the mean of each row.
pub fn global_avg_pool(feature_maps: &Tensor) -> Result<Tensor> {
    let (filters, positions) = match *feature_maps.shape() {
        [f, p] => (f, p),
        ref s => {
            return Err(Error::ShapeMismatch(format!(
                "pooling expects [filters, positions], got {s:?}"
            )))
        }
    };
    let mut y = vec![0.0; filters];
    kernels::row_means(feature_maps.data(), positions, &mut y);
    Tensor::new(vec![filters], y)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutLayer {
    rate: f64,
    mode: Mode,
}

impl DropoutLayer {
    pub fn new(rate: f64, mode: Mode) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidParameter(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Self { rate, mode })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Inverted-dropout multipliers: 0 with probability `rate`, else `1 / (1 - rate)`.
    pub(crate) fn sample_mask(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let keep = 1.0 / (1.0 - self.rate);
        (0..n)
            .map(|_| if rng.random::<f64>() < self.rate { 0.0 } else { keep })
            .collect()
    }
}

pub fn dropout_forward(layer: &DropoutLayer, input: &Tensor, rng: &mut impl Rng) -> Result<Tensor> {
    if layer.mode == Mode::Eval || layer.rate == 0.0 {
        return Ok(input.clone());
    }
    let mask = layer.sample_mask(input.len(), rng);
    let data = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Tensor::new(input.shape().to_vec(), data)
}
