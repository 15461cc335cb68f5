//! Semantic clustering of the test split: PCA, a k-means sweep scored by
//! silhouette, 3-D scatter coordinates and per-cluster keywords.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, Split};
use crate::matrix::Matrix;
use crate::numerics::{self, NumericsError, SilhouetteSampler};
use crate::scalar::Scalar;
use crate::text::{is_stopword, term_tokenize};

pub const KEYWORD_LIMIT: usize = 10;
/// Silhouette scores closer than this are a tie; the smaller k wins.
pub const SILHOUETTE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub p: usize,
    pub n_max: usize,
    pub seed: u64,
    pub silhouette_sample_cap: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { p: 128, n_max: 200, seed: 42, silhouette_sample_cap: numerics::silhouette::DEFAULT_SAMPLE_CAP }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("clustering needs at least 3 test instances, found {0}")]
    TooFewInstances(usize),
    #[error("invalid clustering config: {0}")]
    Config(&'static str),
    #[error("unknown cluster {cluster}; there are {n_opt}")]
    UnknownCluster { cluster: usize, n_opt: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Clustering of a set of points, generic over the working scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct PointClustering<T> {
    pub labels: Vec<usize>,
    pub n_opt: usize,
    pub silhouette_trace: BTreeMap<usize, f64>,
    /// PCA-projected points, `n x p_eff`.
    pub projected: Matrix<T>,
    pub coords: Vec<[T; 3]>,
}

/// Picks `n_opt` as the silhouette argmax over `k = 2..=min(n_max, n - 1)`.
pub fn cluster_points<T: Scalar>(
    features: &Matrix<T>,
    config: &ClusteringConfig,
) -> Result<PointClustering<T>, ClusteringError> {
    let n = features.rows();
    if n < 3 {
        return Err(ClusteringError::TooFewInstances(n));
    }
    if config.p == 0 {
        return Err(ClusteringError::Config("p must be positive"));
    }
    if config.n_max < 2 {
        return Err(ClusteringError::Config("n_max must be at least 2"));
    }
    let model = numerics::pca_fit(features, config.p)?;
    let projected = numerics::pca_transform(&model, features)?;
    let sampler = SilhouetteSampler::new(&projected, config.silhouette_sample_cap, config.seed)?;
    let k_max = config.n_max.min(n - 1);

    let sweep: Vec<(usize, f64, Vec<usize>)> = (2..=k_max)
        .into_par_iter()
        .map(|k| -> Result<_, ClusteringError> {
            let km = numerics::kmeans(&projected, k, config.seed)?;
            // k-means can leave fewer than k distinct labels only on duplicate-heavy data.
            let score = match sampler.score(&km.labels) {
                Ok(s) => s,
                Err(NumericsError::SingleCluster) => f64::NEG_INFINITY,
                Err(e) => return Err(e.into()),
            };
            Ok((k, score, km.labels))
        })
        .collect::<Result<_, _>>()?;

    let mut best = 0;
    for (i, (_, score, _)) in sweep.iter().enumerate() {
        if *score > sweep[best].1 + SILHOUETTE_TIE {
            best = i;
        }
    }
    let silhouette_trace = sweep.iter().map(|&(k, s, _)| (k, s)).collect();
    let (n_opt, _, labels) = sweep.into_iter().nth(best).expect("k sweep is non-empty");
    let coords = (0..n)
        .map(|i| {
            let row = projected.row(i);
            let at = |c: usize| row.get(c).copied().unwrap_or_else(T::zero);
            [at(0), at(1), at(2)]
        })
        .collect();
    Ok(PointClustering { labels, n_opt, silhouette_trace, projected, coords })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    /// Dataset positions of the clustered (test) instances, in file order.
    pub members: Vec<usize>,
    pub labels: Vec<usize>,
    pub n_opt: usize,
    pub silhouette_trace: BTreeMap<usize, f64>,
    pub coords: Vec<[f64; 3]>,
}

impl ClusteringResult {
    /// Cluster of the instance at dataset position `pos`, if it was clustered.
    pub fn label_of(&self, pos: usize) -> Option<usize> {
        self.members.binary_search(&pos).ok().map(|i| self.labels[i])
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_opt];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Clusters every test instance, ID and OOD alike, on its exported features.
pub fn run_clustering(dataset: &Dataset, config: &ClusteringConfig) -> Result<ClusteringResult, ClusteringError> {
    let members = dataset.split_indices(Split::Test);
    if members.len() < 3 {
        return Err(ClusteringError::TooFewInstances(members.len()));
    }
    let d = dataset.feature_dim();
    let features = Matrix::from_fn(members.len(), d, |i, j| dataset.features.get(members[i], j) as f64);
    let fit = cluster_points(&features, config)?;
    Ok(ClusteringResult {
        members,
        labels: fit.labels,
        n_opt: fit.n_opt,
        silhouette_trace: fit.silhouette_trace,
        coords: fit.coords,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordCount {
    pub term: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSummary {
    pub cluster_id: usize,
    pub keywords: Vec<KeywordCount>,
}

/// Raw term frequencies over `texts` with stopwords removed; top `limit` by
/// count, ties broken by term.
pub fn top_keywords<'a>(texts: impl IntoIterator<Item = &'a str>, limit: usize) -> Vec<KeywordCount> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for term in term_tokenize(text) {
            if !is_stopword(&term) {
                *counts.entry(term).or_default() += 1;
            }
        }
    }
    let mut all: Vec<KeywordCount> = counts.into_iter().map(|(term, count)| KeywordCount { term, count }).collect();
    all.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    all.truncate(limit);
    all
}

/// Keywords over the members of one cluster for which `include(position)` holds.
pub fn cluster_keywords_filtered(
    cluster_id: usize,
    dataset: &Dataset,
    result: &ClusteringResult,
    include: impl Fn(usize) -> bool,
) -> Result<KeywordSummary, ClusteringError> {
    if cluster_id >= result.n_opt {
        return Err(ClusteringError::UnknownCluster { cluster: cluster_id, n_opt: result.n_opt });
    }
    let texts = result
        .members
        .iter()
        .zip(&result.labels)
        .filter(|&(&pos, &l)| l == cluster_id && include(pos))
        .map(|(&pos, _)| dataset.instances[pos].text.as_str());
    Ok(KeywordSummary { cluster_id, keywords: top_keywords(texts, KEYWORD_LIMIT) })
}

pub fn cluster_keywords(
    cluster_id: usize,
    dataset: &Dataset,
    result: &ClusteringResult,
) -> Result<KeywordSummary, ClusteringError> {
    cluster_keywords_filtered(cluster_id, dataset, result, |_| true)
}
