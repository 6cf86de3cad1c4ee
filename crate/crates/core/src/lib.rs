//! Embedded feature selection for incomplete multi-channel signal data.
//!
//! The selector weighs each channel's features inside an orthogonal
//! regression of one-hot labels, where a per-channel 0/1 indicator masks
//! samples whose recording on that channel was lost. Three coupled blocks
//! are optimized in alternation: per-channel orthogonal projections, simplex
//! feature weights penalized by a global redundancy matrix, and adaptive
//! channel weights with a closed-form update. Features are then ranked by
//! the product of channel and feature weights.
//!
//! Around the selector, the crate ships the rest of a desk-scale pipeline:
//! time- and band-domain signal feature extraction, a synthetic generator
//! with planted class structure, missing-channel simulation, and a
//! cross-validated evaluation harness with baselines and ablations.

pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod optimizer;
pub mod ranking;
pub mod redundancy;

pub use error::{Error, Result};
pub use model::{
    one_hot, ChannelView, Hyperparams, ModelState, MultiChannelDataset, RankedFeature,
    SelectionResult,
};
pub use optimizer::{fit, fit_with_options, FitOptions};
pub use ranking::{rank_features, rank_features_with, select_top_k, ScoreMode};
pub use redundancy::{redundancy_matrix, RedundancyMatrix};
