//! The batch analysis product and its on-disk cache.
//!
//! `analysis.json` holds the metadata, threshold, silhouette trace and keyword
//! summaries; `scores.dlmx` (n x 1), `labels.dlmx` (n_test x 1) and
//! `coords.dlmx` (n_test x 3) hold the per-instance arrays.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{self, ClusteringConfig, ClusteringError, ClusteringResult, KeywordSummary};
use crate::ingest::{self, CodecError, Dataset, IngestError, Split};
use crate::matrix::Matrix;
use crate::saliency::SaliencyConfig;
use crate::scoring::{self, ScoreTable, ScoringError, ThresholdSource, ThresholdState, FALLBACK_THRESHOLD};

pub const CACHE_FORMAT: &str = "oodlens-analysis/1";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const SCORES_FILE: &str = "scores.dlmx";
pub const LABELS_FILE: &str = "labels.dlmx";
pub const COORDS_FILE: &str = "coords.dlmx";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub clustering: ClusteringConfig,
    pub saliency: SaliencyConfig,
}

impl AnalysisConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            clustering: ClusteringConfig { seed, ..Default::default() },
            saliency: SaliencyConfig { seed, ..Default::default() },
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("instance at row {row}: {source}")]
    Scoring { row: usize, source: ScoringError },
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("analysis cache {path}: {message}")]
    Cache { path: String, message: String },
}

/// Immutable result of analyzing a dataset.
#[derive(Debug, Clone)]
pub struct AnalysisBundle {
    pub dataset: Dataset,
    pub scores: ScoreTable<f32>,
    pub threshold: ThresholdState,
    pub clustering: ClusteringResult,
    pub keywords: Vec<KeywordSummary>,
    pub config: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouettePoint {
    pub k: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheFiles {
    pub scores: String,
    pub labels: String,
    pub coords: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisManifest {
    pub format: String,
    pub dataset: String,
    pub n_instances: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub config: AnalysisConfig,
    pub threshold: ThresholdState,
    pub n_opt: usize,
    pub silhouette_trace: Vec<SilhouettePoint>,
    pub keywords: Vec<KeywordSummary>,
    pub files: CacheFiles,
}

pub fn analyze(dataset: Dataset, config: AnalysisConfig) -> Result<AnalysisBundle, AnalysisError> {
    let scores = ScoreTable::<f32>::from_dataset(&dataset).map_err(|(row, source)| AnalysisError::Scoring { row, source })?;
    let epsilon = match scoring::default_threshold(&scores.split_scores(Split::Train), &scores.split_scores(Split::Test)) {
        Ok(e) => e,
        Err(ScoringError::Degenerate) => FALLBACK_THRESHOLD,
        Err(e) => return Err(AnalysisError::Scoring { row: 0, source: e }),
    };
    let clustering = clustering::run_clustering(&dataset, &config.clustering)?;
    let keywords = (0..clustering.n_opt)
        .map(|c| clustering::cluster_keywords(c, &dataset, &clustering))
        .collect::<Result<_, _>>()?;
    Ok(AnalysisBundle {
        dataset,
        scores,
        threshold: ThresholdState { epsilon, source: ThresholdSource::Precomputed },
        clustering,
        keywords,
        config,
    })
}

impl AnalysisBundle {
    pub fn manifest(&self) -> AnalysisManifest {
        AnalysisManifest {
            format: CACHE_FORMAT.into(),
            dataset: self.dataset.name.clone(),
            n_instances: self.dataset.len(),
            n_train: self.scores.split_len(Split::Train),
            n_test: self.scores.split_len(Split::Test),
            config: self.config,
            threshold: self.threshold,
            n_opt: self.clustering.n_opt,
            silhouette_trace: self
                .clustering
                .silhouette_trace
                .iter()
                .map(|(&k, &score)| SilhouettePoint { k, score })
                .collect(),
            keywords: self.keywords.clone(),
            files: CacheFiles { scores: SCORES_FILE.into(), labels: LABELS_FILE.into(), coords: COORDS_FILE.into() },
        }
    }

    pub fn write_cache(&self, out_dir: &Path) -> Result<(), AnalysisError> {
        let cache_err = |e: std::io::Error| AnalysisError::Cache { path: out_dir.display().to_string(), message: e.to_string() };
        fs::create_dir_all(out_dir).map_err(cache_err)?;
        let json = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        fs::write(out_dir.join(ANALYSIS_FILE), json + "\n").map_err(cache_err)?;

        let n = self.scores.scores.len();
        let scores = Matrix::from_vec(n, 1, self.scores.scores.clone()).map_err(CodecError::from)?;
        ingest::write_matrix_file(&out_dir.join(SCORES_FILE), &scores)?;
        let m = self.clustering.labels.len();
        let labels = Matrix::from_vec(m, 1, self.clustering.labels.iter().map(|&l| l as f32).collect())
            .map_err(CodecError::from)?;
        ingest::write_matrix_file(&out_dir.join(LABELS_FILE), &labels)?;
        let coords = Matrix::from_fn(m, 3, |i, j| self.clustering.coords[i][j] as f32);
        ingest::write_matrix_file(&out_dir.join(COORDS_FILE), &coords)?;
        Ok(())
    }

    /// Rebuilds a bundle from a dataset directory and an analysis cache.
    pub fn load(data_dir: &Path, out_dir: &Path) -> Result<Self, AnalysisError> {
        let dataset = ingest::load_dataset(data_dir)?;
        Self::from_cache(dataset, out_dir)
    }

    pub fn from_cache(dataset: Dataset, out_dir: &Path) -> Result<Self, AnalysisError> {
        let path = out_dir.join(ANALYSIS_FILE);
        let bad = |message: String| AnalysisError::Cache { path: path.display().to_string(), message };
        let text = fs::read_to_string(&path).map_err(|e| bad(e.to_string()))?;
        let manifest: AnalysisManifest = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if manifest.format != CACHE_FORMAT {
            return Err(bad(format!("unsupported format {:?}", manifest.format)));
        }
        if manifest.dataset != dataset.name || manifest.n_instances != dataset.len() {
            return Err(bad(format!(
                "cache is for dataset {:?} with {} instances, not {:?} with {}",
                manifest.dataset,
                manifest.n_instances,
                dataset.name,
                dataset.len()
            )));
        }
        let members = dataset.split_indices(Split::Test);
        let scores = ingest::read_matrix_file(&out_dir.join(&manifest.files.scores))?;
        let labels = ingest::read_matrix_file(&out_dir.join(&manifest.files.labels))?;
        let coords = ingest::read_matrix_file(&out_dir.join(&manifest.files.coords))?;
        if scores.shape() != (dataset.len(), 1) {
            return Err(bad(format!("scores sidecar is {:?}", scores.shape())));
        }
        if labels.shape() != (members.len(), 1) || coords.shape() != (members.len(), 3) {
            return Err(bad("label or coordinate sidecar does not match the test split".into()));
        }
        let labels: Vec<usize> = labels.as_slice().iter().map(|&l| l as usize).collect();
        if labels.iter().any(|&l| l >= manifest.n_opt) {
            return Err(bad("cluster label out of range".into()));
        }
        let clustering = ClusteringResult {
            members,
            labels,
            n_opt: manifest.n_opt,
            silhouette_trace: manifest.silhouette_trace.iter().map(|p| (p.k, p.score)).collect(),
            coords: coords.row_iter().map(|r| [r[0] as f64, r[1] as f64, r[2] as f64]).collect(),
        };
        let splits = dataset.instances.iter().map(|i| i.split).collect();
        Ok(Self {
            scores: ScoreTable { scores: scores.into_vec(), splits },
            threshold: manifest.threshold,
            clustering,
            keywords: manifest.keywords,
            config: manifest.config,
            dataset,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.threshold.epsilon
    }
}
