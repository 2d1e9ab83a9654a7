//! Scaling-study harness for 1D residual networks on multi-label ECG
//! classification.
//!
//! The crate provides, end to end: a dense f64 tensor with hand-derived
//! forward/backward kernels ([`ops`]), a parameterized residual network
//! family with exact structural accounting ([`resnet`]), ECG ingestion,
//! preprocessing and a synthetic generator ([`data`]), a RandAugment-style
//! transform stack with Mixup ([`augment`]), an Adam/one-cycle training
//! loop ([`train`]), a hyperparameter search harness with asynchronous
//! successive halving ([`hpo`]), and macro-F1 evaluation with scaling
//! correlation reports ([`metrics`]).

pub mod augment;
pub mod cli;
pub mod data;
pub mod error;
pub mod hpo;
pub mod metrics;
pub mod ops;
pub mod resnet;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
