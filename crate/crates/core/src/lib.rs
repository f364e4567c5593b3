//! Keyframe selection conditioned on a query image.
//!
//! A video is cut into fixed-length shots. Each shot's representative frame
//! yields object detections and an HSV salient-region mask, which are
//! summarized into a feature vector and compared with the same features of
//! the query image. A difference-of-convex quadratic loss over a relaxed
//! selection vector is minimized with the concave-convex procedure, and the
//! relaxed scores are thresholded at their standard deviation.
//!
//! The [`evaluation`] module scores a summary against ground truth through
//! maximum-weight bipartite matching of concept sets.

pub mod classes;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod objective;
pub mod pipeline;
pub mod query;
pub mod saliency;
pub mod solver;
pub mod timeline;

pub use error::{Error, Result};
pub use evaluation::{EvalReport, GroundTruth, MetricMode};
pub use ingest::{DetectionRecord, FeatureMatrix, FeatureVector, ShotRecord, ShotSpan};
pub use objective::{LossParams, ObjectiveMatrices};
pub use query::{DistanceVector, QueryProfile};
pub use saliency::{HsvPlanes, SaliencyMask};
pub use solver::{SelectionMask, SelectionScores, SolverConfig, SummaryManifest, ThresholdMode};
