//! Federated learning over LEO satellite constellations, at desk scale.
//!
//! The library models a ground station that trains a dense network across a
//! constellation of satellites with heterogeneous compute, memory, and uplink
//! budgets. The full pipeline is: characterize each satellite's budget, split
//! the global model into channel-block sub-structures sized by the group
//! minimum budget, distribute combinations with a scrolling window, train
//! locally, aggregate with orbital-period correction, assemble a block-diagonal
//! group model, and merge group models into the latest global model with a
//! staleness-aware pseudo-synchronous rule. Baseline strategies (FedAvg,
//! FedAsync, static/random distribution, width-nested prefix training) are
//! included for ablations.
//!
//! Everything is deterministic under a master seed.

pub mod aggregation;
pub mod budget;
pub mod config;
pub mod constellation;
pub mod data;
pub mod distribution;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod substructure;
pub mod wire;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{Activation, DenseLayer, Gradients, LabeledBatch, ModelWeights};
