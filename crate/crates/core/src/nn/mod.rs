//! Differentiable building blocks: dense, 1-D convolution, global average
//! pooling, ReLU, dropout, He initialization and a reverse-mode tape.

mod init;
mod kernels;
mod layers;
mod params;
mod tape;

pub use init::he_init;
pub use layers::{
    conv1d_forward, dense_forward, dropout_forward, global_avg_pool, Activation, Conv1dLayer, DenseLayer, DropoutLayer,
    Mode,
};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{GradientTape, Var};

/// Mean of squared differences over equal-length slices.
pub(crate) fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}
