//! Part-based visual tracking on HOG feature pyramids.
//!
//! The crate is organized bottom-up:
//!
//! - [`feature_pyramid`]: frames, 31-channel HOG features and multi-scale pyramids.
//! - [`model`]: mixture-of-star models (root and part filters, deformation, biases).
//! - [`scoring`]: filter responses, generalized distance transforms and component scores.
//! - [`occlusion`]: logistic normalization and visible part subset selection.
//! - [`tracker`]: the dynamic CRF recursion over per-vertex visibility posteriors.
//! - [`harness`]: sequence I/O, synthetic fixtures, detection, evaluation and reports.

pub mod error;
pub mod feature_pyramid;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod occlusion;
pub mod scoring;
pub mod tracker;

pub use error::{Error, Result};
pub use feature_pyramid::{
    build_pyramid, compute_hog, FeatureMap, FeaturePyramid, Frame, PyramidConfig, HOG_CHANNELS,
};
pub use geometry::BBox;
pub use model::{
    make_synthetic_model, ComponentSpec, Filter, MixtureModel, PartSpec, Violation,
};
pub use occlusion::{part_probability, select_subset, subset_mean, SubsetSelection, SubsetStrategy};
pub use scoring::{
    component_score_map, filter_response, generalized_distance_transform, ComponentScoreMap,
    Deformation, DeformedScoreMap, Placement, ScoreMap,
};
pub use tracker::{FrameOutput, TrackState, TrackerConfig};
