//! Stacked ensemble regression for daily time series.

pub mod artifact;
pub mod boosting;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod explain;
pub mod linear;
pub mod learner;
pub mod matrix;
pub mod meta;
pub mod metrics;
pub mod mlp;
pub mod rng;
pub mod selection;
pub mod tree;
pub mod tuner;
pub mod trees;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
