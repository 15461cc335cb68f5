//! Out-of-distribution exploration for text corpora.
//!
//! Scores instances by maximum softmax probability, thresholds them, clusters
//! the new data on exported hidden features, summarizes clusters by keywords
//! and explains single instances through factorized token activations.

pub mod analysis;
pub mod clustering;
pub mod fixtures;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod numerics;
pub mod saliency;
pub mod scalar;
pub mod scoring;
pub mod text;

pub use analysis::{analyze, AnalysisBundle, AnalysisConfig, AnalysisError};
pub use clustering::{ClusteringConfig, ClusteringResult, KeywordSummary};
pub use ingest::{load_dataset, Dataset, Instance, Split};
pub use matrix::Matrix;
pub use saliency::{SaliencyConfig, SaliencyResult};
pub use scalar::Scalar;
pub use scoring::{ScoreTable, Verdict};

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type PcaModel32 = numerics::PcaModel<f32>;
pub type PcaModel64 = numerics::PcaModel<f64>;
pub type KMeansResult64 = numerics::KMeansResult<f64>;
pub type NmfResult64 = numerics::NmfResult<f64>;
/// Scores as stored: one `f32` per instance.
pub type Scores = ScoreTable<f32>;
