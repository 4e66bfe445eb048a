//! Differential-expression biclustering of omics matrices.
//!
//! Given a features-by-samples matrix, the pipeline finds biclusters:
//! feature subsets that split the samples into a well-separated minority
//! and a background majority. It works in three stages: per-feature
//! binarization by 1-D clustering with an empirical noise null model,
//! grouping of similar binarized features into modules, and assembly of
//! each module into a bicluster with optional differential-expression
//! verification. Repeated seeded runs can be reduced to consensus
//! biclusters, and the crate ships the matching evaluation metrics,
//! redundancy measures and the synthetic benchmark generator.
//!
//! Everything is deterministic for a fixed seed, independent of thread
//! count, row order and column order.

pub mod bicluster;
pub mod binarize;
pub mod cluster1d;
pub mod consensus;
pub mod dataio;
pub mod error;
pub mod evaluate;
pub mod modules;
pub mod pipeline;
pub mod seed;
pub mod simulate;
pub mod stats;

pub use bicluster::{Bicluster, BiclusterDirection};
pub use binarize::{BinarizationMethod, BinarizedFeature};
pub use dataio::{ExpressionMatrix, StandardizedMatrix};
pub use error::{Result, UnpastError};
pub use evaluate::{GroundTruth, PerformanceReport};
pub use modules::{Clustering, DirectionMode, FeatureModule};
pub use pipeline::{run_unpast, run_unpast_multi, RunOutput, UnpastParams};
pub use simulate::{Scenario, SimulationSpec};
