//! The fused CNN: configuration, network assembly, training loop and
//! checkpoints.

pub mod checkpoint;
pub mod config;
pub mod network;
pub mod train;

pub use checkpoint::{state_bits, Checkpoint};
pub use config::ModelConfig;
pub use network::FusionNet;
pub use train::{
    accuracy_of, predict_labels, predict_proba, train, Adadelta, EpochMetrics, ModelInputs,
    TrainReport,
};
