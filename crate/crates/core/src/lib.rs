// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curriculum;
pub mod data;
pub mod error;
pub mod harness;
mod io_util;
pub mod metrics;
pub mod numcore;
pub mod scalar;
pub mod slidelevel;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = numcore::Matrix<f64>;
pub type Mlp = numcore::MlpModel<f64>;
pub type Mlp32 = numcore::MlpModel<f32>;
pub type Grads = numcore::Gradients<f64>;
pub type Optimizer = numcore::OptimizerState<f64>;
pub type Hardness = curriculum::BatchHardness<f64>;
