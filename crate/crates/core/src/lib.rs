//! Month-ahead monsoon rainfall regression from gauge records.
//!
//! Daily readings are cleaned and summed into monthly series ([`data`]),
//! windowed into 108-month samples with station coordinates, and fitted with a
//! wide (convolutional) plus deep (dense) network or one of two baselines
//! ([`models`], [`optim`]). Layers, reverse-mode differentiation and Adam are
//! implemented here on plain `f64` tensors ([`tensor`], [`nn`]). [`eval`]
//! produces per-month error tables and station summaries, and [`cli`] drives
//! the whole flow from the command line.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod models;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
