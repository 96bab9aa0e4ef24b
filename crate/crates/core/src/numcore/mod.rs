//! Dense matrices, the perceptron classifier, cross-entropy, Adam and the
//! multi-step learning-rate schedule.

mod checkpoint;
mod loss;
mod matrix;
mod mlp;
mod optim;
mod schedule;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use loss::{per_sample_cross_entropy, softmax_rows};
pub use matrix::Matrix;
pub use mlp::{normalize_mask, Dense, Gradients, MlpModel};
pub use optim::{AdamConfig, OptimizerState};
pub use schedule::LrSchedule;
