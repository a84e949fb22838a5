//! Coarse-to-fine salient object detection.
//!
//! An image is over-segmented into superpixels, each described by a
//! 53-dimensional feature vector. The prior-weighted feature matrix is split
//! into a low-rank background part and a sparse salient part by ADMM with a
//! graph Laplacian smoothness term; column norms of the sparse part give a
//! coarse saliency map. A per-image weighted ridge projection learned from
//! confident superpixels then re-scores the ambiguous ones.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod color;
pub mod error;
pub mod features;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod refinement;
pub mod saliency;
pub mod solver;
pub mod superpixel;
pub mod synthetic;

pub use error::{Error, Result};
pub use features::{
    apply_priors, compute_priors, extract_features, FeatureMatrix, FilterBank, PriorVector,
    FEATURE_DIM,
};
pub use graph::{build_laplacian, LaplacianMatrix};
pub use metrics::{EvaluationReport, ImageScores};
pub use pipeline::{PipelineConfig, Stage};
pub use refinement::{learn_projection, partition_samples, refine, RefinementModel, SamplePartition};
pub use saliency::{saliency_from_sparse, SaliencyMap};
pub use solver::{decompose, DecompositionResult, SolverConfig};
pub use superpixel::{segment, SlicParams, SuperpixelMap};
