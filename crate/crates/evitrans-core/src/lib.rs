//! Core numerics for evidence-transfer representation learning.
//!
//! This crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the filesystem: dense matrices with hand-derived layer gradients,
//! the SSIM reconstruction loss and the joint evidence-transfer objective,
//! autoencoder training, class-balancing resamplers, the unsupervised
//! detectors (k-means, agglomerative clustering, linear one-class SVM) and
//! the cluster-to-label evaluation metrics. File formats, the experiment
//! pipeline and the CLI live in the companion `evitrans` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adam;
pub mod detect;
pub mod error;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod resample;
pub mod rng;
pub mod train;

pub use error::{CoreError, Result};
pub use matrix::Matrix;
