//! Dense numerical kernels: PCA, k-means, silhouette and NMF.

mod linalg;
pub mod kmeans;
pub mod nmf;
pub mod pca;
pub mod silhouette;

use thiserror::Error;

pub use kmeans::{kmeans, KMeansResult};
pub use nmf::{nmf, nmf_observed, NmfResult};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use silhouette::{silhouette_mean, SilhouetteSampler};

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("{0} must be positive")]
    ZeroParameter(&'static str),
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k={k} exceeds the {n} available points")]
    TooManyClusters { k: usize, n: usize },
    #[error("silhouette undefined for k=1")]
    SingleCluster,
    #[error("n={n} factors exceeds min(rows, cols)={max}")]
    TooManyFactors { n: usize, max: usize },
    #[error("negative or non-finite entry {value} at ({row}, {col})")]
    Negative { row: usize, col: usize, value: f64 },
}
