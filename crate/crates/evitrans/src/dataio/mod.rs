//! Data ingestion, label expansion, synthetic benchmarks and exports.

pub mod catalog;
pub mod features;
pub mod labels;
pub mod projection;
pub mod synth;

pub use catalog::{EventCatalog, EventRecord, EventType};
pub use features::FeatureMatrix;
pub use labels::{
    build_rotation_experiment, expand_combined_labels, expand_event_labels, RotationExperiment,
    RotationSpec,
};
pub use projection::{export_latent_projection, pca_top2};
pub use synth::{synth_generate, SynthConfig};
