//! Pure view functions over an [`AnalysisBundle`]. The HTTP layer only parses
//! parameters and serializes what these return.

use std::collections::BTreeMap;

use oodlens_core::analysis::{AnalysisBundle, AnalysisConfig, SilhouettePoint};
use oodlens_core::clustering::{cluster_keywords_filtered, KeywordSummary};
use oodlens_core::ingest::Split;
use oodlens_core::scoring::{self, classify, Histogram, IconArray, ThresholdSource, Verdict, DEFAULT_HISTOGRAM_BINS, DEFAULT_ICONS};
use serde::{Deserialize, Serialize};

use crate::error::ViewError;

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetFilter {
    Id,
    Ood,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    ScoreAsc,
    ScoreDesc,
    Id,
}

impl SortKey {
    pub fn parse(s: &str) -> Result<Self, ViewError> {
        match s {
            "score_asc" => Ok(Self::ScoreAsc),
            "score_desc" => Ok(Self::ScoreDesc),
            "id" => Ok(Self::Id),
            other => Err(ViewError::invalid("sort", format!("{other:?} is not one of score_asc, score_desc, id"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub split: Split,
    pub set: SetFilter,
    pub cluster: Option<usize>,
    pub search: Option<String>,
    /// `None` picks the grid default: OOD descending, everything else ascending.
    pub sort: Option<SortKey>,
    pub page: usize,
    pub page_size: usize,
    pub threshold: Option<f64>,
}

impl Default for QuerySpec {
    fn default() -> Self {
        Self {
            split: Split::Test,
            set: SetFilter::Ood,
            cluster: None,
            search: None,
            sort: None,
            page: 0,
            page_size: DEFAULT_PAGE_SIZE,
            threshold: None,
        }
    }
}

impl QuerySpec {
    pub fn effective_sort(&self) -> SortKey {
        self.sort.unwrap_or(match self.set {
            SetFilter::Ood => SortKey::ScoreDesc,
            _ => SortKey::ScoreAsc,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: u64,
    pub split: Split,
    pub prediction: usize,
    pub prediction_name: String,
    /// Train instances are not clustered.
    pub cluster: Option<usize>,
    pub text: String,
    pub ood_score: f32,
    pub is_ood: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub epsilon: f64,
    pub items: Vec<InstanceRecord>,
}

pub fn check_threshold(threshold: Option<f64>) -> Result<(), ViewError> {
    match threshold {
        Some(t) if !(0.0..=1.0).contains(&t) => Err(ViewError::invalid("threshold", format!("{t} is outside [0, 1]"))),
        _ => Ok(()),
    }
}

fn epsilon(bundle: &AnalysisBundle, threshold: Option<f64>) -> Result<f64, ViewError> {
    check_threshold(threshold)?;
    Ok(threshold.unwrap_or(bundle.epsilon()))
}

fn is_ood(bundle: &AnalysisBundle, pos: usize, eps: f64) -> bool {
    classify(bundle.scores.scores[pos] as f64, eps) == Verdict::Ood
}

pub fn record(bundle: &AnalysisBundle, pos: usize, eps: f64) -> InstanceRecord {
    let ds = &bundle.dataset;
    let inst = &ds.instances[pos];
    let prediction = ds.prediction(pos);
    InstanceRecord {
        id: inst.id,
        split: inst.split,
        prediction,
        prediction_name: ds.class_names[prediction].clone(),
        cluster: bundle.clustering.label_of(pos),
        text: inst.text.clone(),
        ood_score: bundle.scores.scores[pos],
        is_ood: is_ood(bundle, pos, eps),
    }
}

pub fn instance(bundle: &AnalysisBundle, id: u64, threshold: Option<f64>) -> Result<InstanceRecord, ViewError> {
    let eps = epsilon(bundle, threshold)?;
    let pos = bundle.dataset.position(id).ok_or(ViewError::UnknownInstance(id))?;
    Ok(record(bundle, pos, eps))
}

/// Dataset positions matching `spec`, in result order.
pub fn filtered_positions(bundle: &AnalysisBundle, spec: &QuerySpec) -> Result<Vec<usize>, ViewError> {
    let eps = epsilon(bundle, spec.threshold)?;
    if let Some(c) = spec.cluster {
        if c >= bundle.clustering.n_opt {
            return Err(ViewError::UnknownCluster { cluster: c, n_opt: bundle.clustering.n_opt });
        }
    }
    let needle = spec.search.as_deref().filter(|s| !s.is_empty()).map(str::to_lowercase);
    let ds = &bundle.dataset;
    let mut hits: Vec<usize> = (0..ds.len())
        .filter(|&p| ds.instances[p].split == spec.split)
        .filter(|&p| match spec.set {
            SetFilter::All => true,
            SetFilter::Ood => is_ood(bundle, p, eps),
            SetFilter::Id => !is_ood(bundle, p, eps),
        })
        .filter(|&p| spec.cluster.is_none() || bundle.clustering.label_of(p) == spec.cluster)
        .filter(|&p| needle.as_ref().is_none_or(|n| ds.instances[p].text.to_lowercase().contains(n)))
        .collect();
    let score = |p: &usize| bundle.scores.scores[*p];
    match spec.effective_sort() {
        SortKey::ScoreAsc => hits.sort_by(|a, b| score(a).total_cmp(&score(b))),
        SortKey::ScoreDesc => hits.sort_by(|a, b| score(b).total_cmp(&score(a))),
        SortKey::Id => hits.sort_by_key(|&p| ds.instances[p].id),
    }
    Ok(hits)
}

pub fn query_instances(bundle: &AnalysisBundle, spec: &QuerySpec) -> Result<Page, ViewError> {
    if spec.page_size == 0 || spec.page_size > MAX_PAGE_SIZE {
        return Err(ViewError::invalid("page_size", format!("must be in 1..={MAX_PAGE_SIZE}")));
    }
    let eps = epsilon(bundle, spec.threshold)?;
    let hits = filtered_positions(bundle, spec)?;
    let items = hits
        .iter()
        .skip(spec.page.saturating_mul(spec.page_size))
        .take(spec.page_size)
        .map(|&p| record(bundle, p, eps))
        .collect();
    Ok(Page { total: hits.len(), page: spec.page, page_size: spec.page_size, epsilon: eps, items })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub total: usize,
    pub id: usize,
    pub ood: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionView {
    pub epsilon: f64,
    pub source: ThresholdSource,
    pub precomputed_epsilon: f64,
    pub train_counts: SplitCounts,
    pub test_counts: SplitCounts,
    /// `None` for an empty split.
    pub train_icons: Option<IconArray>,
    pub test_icons: Option<IconArray>,
    pub histogram: Histogram,
}

pub fn split_counts(bundle: &AnalysisBundle, split: Split, eps: f64) -> SplitCounts {
    let mut c = SplitCounts { total: 0, id: 0, ood: 0 };
    for (p, &s) in bundle.scores.splits.iter().enumerate() {
        if s == split {
            c.total += 1;
            if is_ood(bundle, p, eps) {
                c.ood += 1;
            } else {
                c.id += 1;
            }
        }
    }
    c
}

pub fn distribution(bundle: &AnalysisBundle, threshold: Option<f64>, bins: Option<usize>) -> Result<DistributionView, ViewError> {
    let eps = epsilon(bundle, threshold)?;
    let bins = bins.unwrap_or(DEFAULT_HISTOGRAM_BINS);
    if bins == 0 {
        return Err(ViewError::invalid("bins", "must be at least 1"));
    }
    let histogram = scoring::histogram(&bundle.scores, bins).map_err(|e| ViewError::invalid("bins", e.to_string()))?;
    let train_counts = split_counts(bundle, Split::Train, eps);
    let test_counts = split_counts(bundle, Split::Test, eps);
    let icons = |c: &SplitCounts| scoring::icon_array(c.id, c.ood, DEFAULT_ICONS).ok();
    Ok(DistributionView {
        epsilon: eps,
        source: if threshold.is_some() { ThresholdSource::User } else { ThresholdSource::Precomputed },
        precomputed_epsilon: bundle.epsilon(),
        train_icons: icons(&train_counts),
        test_icons: icons(&test_counts),
        train_counts,
        test_counts,
        histogram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub id: u64,
    /// Coordinates are served at the cache's f32 precision.
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub cluster: usize,
    pub prediction: usize,
    pub ood_score: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub cluster: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterView {
    pub n_opt: usize,
    pub nodes: Vec<ClusterNode>,
    pub legend: Vec<LegendEntry>,
}

pub fn cluster_geometry(bundle: Option<&AnalysisBundle>) -> Result<ClusterView, ViewError> {
    let bundle = bundle.ok_or(ViewError::NotAnalyzed)?;
    let r = &bundle.clustering;
    let nodes = r
        .members
        .iter()
        .zip(&r.labels)
        .zip(&r.coords)
        .map(|((&pos, &cluster), c)| ClusterNode {
            id: bundle.dataset.instances[pos].id,
            x: c[0] as f32,
            y: c[1] as f32,
            z: c[2] as f32,
            cluster,
            prediction: bundle.dataset.prediction(pos),
            ood_score: bundle.scores.scores[pos],
        })
        .collect();
    let legend = r.cluster_sizes().into_iter().enumerate().map(|(cluster, count)| LegendEntry { cluster, count }).collect();
    Ok(ClusterView { n_opt: r.n_opt, nodes, legend })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordView {
    pub ood_only: bool,
    /// Threshold used for `ood_only`; absent otherwise.
    pub epsilon: Option<f64>,
    #[serde(flatten)]
    pub summary: KeywordSummary,
}

/// Keywords over all members of cluster `k`, or only those classified OOD at
/// `threshold` (default: the precomputed one).
pub fn keywords(bundle: &AnalysisBundle, k: usize, ood_only: bool, threshold: Option<f64>) -> Result<KeywordView, ViewError> {
    let eps = epsilon(bundle, threshold)?;
    let n_opt = bundle.clustering.n_opt;
    if k >= n_opt {
        return Err(ViewError::UnknownCluster { cluster: k, n_opt });
    }
    if !ood_only {
        return Ok(KeywordView { ood_only, epsilon: None, summary: bundle.keywords[k].clone() });
    }
    let summary = cluster_keywords_filtered(k, &bundle.dataset, &bundle.clustering, |p| is_ood(bundle, p, eps))
        .map_err(|_| ViewError::UnknownCluster { cluster: k, n_opt })?;
    Ok(KeywordView { ood_only, epsilon: Some(eps), summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub class_names: Vec<String>,
    pub n_instances: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_with_activations: usize,
    pub epsilon: f64,
    pub n_opt: usize,
    pub silhouette_trace: Vec<SilhouettePoint>,
    pub cluster_sizes: BTreeMap<usize, usize>,
    pub config: AnalysisConfig,
}

pub fn summary(bundle: &AnalysisBundle) -> Summary {
    let m = bundle.manifest();
    Summary {
        dataset: m.dataset,
        class_names: bundle.dataset.class_names.clone(),
        n_instances: m.n_instances,
        n_train: m.n_train,
        n_test: m.n_test,
        n_with_activations: bundle.dataset.activations.len(),
        epsilon: bundle.epsilon(),
        n_opt: m.n_opt,
        silhouette_trace: m.silhouette_trace,
        cluster_sizes: bundle.clustering.cluster_sizes().into_iter().enumerate().collect(),
        config: m.config,
    }
}
