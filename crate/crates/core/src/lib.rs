//! Online class-incremental learning with cluster-based exemplar selection,
//! balanced replay batches and contrastive-batch knowledge distillation.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: samples, task schedules, synthetic and file-backed streams
//! - [`clustering`]: k-NN affinity graphs and power iteration clustering
//! - [`memory`]: exemplar sets and their selection/update policies
//! - [`nn`]: the growable-head classifier, losses and SGD
//! - [`augment`]: contrastive-batch generation
//! - [`learner`]: the online protocol for every method
//! - [`eval`]: accuracy, summaries and metric files
//! - [`experiment`]: config-driven grids over methods and seeds

pub mod augment;
pub mod clustering;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod learner;
pub mod memory;
pub mod nn;

pub use error::{Error, Result};
