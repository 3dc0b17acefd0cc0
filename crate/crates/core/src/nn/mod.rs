//! Small dense neural networks in f64, with minibatch MSE training.

mod activation;
mod error;
mod models;
mod network;
mod train;

pub use activation::ActivationKind;
pub use error::NnError;
pub use models::{GraphGrads, GraphScratch, TrainBranch, TrainGraph, TrainSet};
pub use network::{backward, mse_loss, BatchCache, GradientSet, Layer, LayerSpec, MlpNetwork};
pub use train::{fit, train, EpochStats, Optimizer, TrainConfig, TrainReport};
