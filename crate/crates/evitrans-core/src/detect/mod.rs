//! Unsupervised detectors applied to latent representations.

mod agglomerative;
mod kmeans;
mod ocsvm;

pub use agglomerative::{agglomerative_fit, AgglomerativeResult, Linkage};
pub use kmeans::KMeansModel;
pub use ocsvm::{OcsvmConfig, OcsvmModel, OcsvmScores};
