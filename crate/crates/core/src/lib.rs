//! Unsupervised ensemble learning over binary classifier predictions.
//!
//! Given an `n x d` matrix of 0/1 outputs from `d` classifiers on `n`
//! unlabelled instances, estimate each instance's true label. The crate
//! provides:
//!
//! * [`rbm`]: restricted Boltzmann machines trained by contrastive divergence,
//!   with exact likelihoods for small visible layers;
//! * [`mapping`]: the equivalence between a one-hidden-unit RBM and the
//!   Dawid-Skene conditional independence model;
//! * [`dnn`]: stacked RBMs whose layer widths come from the singular values
//!   of a probe RBM's weight matrix;
//! * [`baselines`]: majority vote, Dawid-Skene EM and the spectral
//!   meta-learner;
//! * [`datagen`]: synthetic generators with posterior oracles;
//! * [`metrics`], [`verify`] and [`cli`] for evaluation and reproducible runs.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod datagen;
pub mod dnn;
pub mod error;
pub mod mapping;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod rbm;
pub mod rng;
pub mod verify;

pub use data::PredictionMatrix;
pub use error::{Error, Result};
pub use mapping::CondIndParams;
pub use rbm::{RbmParams, TrainConfig};
