//! Sequence model mapping stage data to per-stage binary decision probabilities.
//!
//! A bidirectional LSTM encodes the stage inputs of every scenario. Encoder
//! states are averaged over the scenarios that share a tree node at each stage,
//! and an LSTM decoder with general attention over the averaged states emits
//! one sigmoid probability per item and stage. Previous decisions enter the
//! decoder: ground truth during training, thresholded own predictions at
//! inference. Weights are shared across steps, so any horizon is accepted.

mod checkpoint;
mod features;
mod linalg;
mod lstm;
mod network;
mod train;

use serde::{Deserialize, Serialize};

use crate::instances::Instance;

pub use checkpoint::{from_checkpoint, to_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use features::{node_features, FeatureScaling, MCLSP_ITEM_FEATURES, MSMK_ITEM_FEATURES};
pub use linalg::{sigmoid, softmax, Mat};
pub use lstm::{lstm_cell, LstmWeights, GATES};
pub use network::{
    attention, bilstm_encode, episode_loss, forward, forward_episode, loss, loss_and_gradient, neda_average,
    sample_loss, Episode, ForwardMode, ModelShape, Params, Prediction, SeqModel, DECISION_THRESHOLD,
};
pub use train::{train, train_from, Adam, TrainConfig, TrainLog};

/// An instance with its optimal binary decisions, `[item][node]`. Targets are
/// node-indexed, so scenarios sharing a node share them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub id: u64,
    pub instance: Instance,
    pub targets: Vec<Vec<f64>>,
}
