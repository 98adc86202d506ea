//! Fairness-aware training without demographics.
//!
//! The crate trains small feedforward models so that per-example training
//! losses concentrate around their mean, while keeping the mean loss itself
//! at the level plain empirical risk minimization reaches. The update mixes
//! the gradient of the mean loss with the gradient of the loss standard
//! deviation using a coefficient recomputed at every step, which makes the
//! combined gradient equivalent to a non-negative per-example reweighting.
//!
//! Modules:
//!
//! - [`nnet`]: feedforward models with manual backpropagation of weighted
//!   per-example losses.
//! - [`vfair`]: the dynamic two-gradient update and its alternative
//!   secondary objectives.
//! - [`baselines`]: ERM and chi-square DRO steps.
//! - [`metrics`]: group utility disparity metrics, random-partition ranks,
//!   Welch's test and model similarity.
//! - [`data`]: CSV ingestion, preprocessing, splits and a synthetic biased
//!   data generator.
//! - [`harness`]: experiment configuration, training orchestration and
//!   report emission used by the `vfair` binary.

pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nnet;
pub mod vfair;

pub use error::{Error, Result};
