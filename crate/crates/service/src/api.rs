use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::Uri;
use axum::routing::get;
use axum::{Json, Router};
use oodlens_core::analysis::AnalysisBundle;
use oodlens_core::ingest::Split;
use oodlens_core::saliency::{instance_saliency, InstanceSaliency, SaliencyConfig};
use oodlens_core::scoring::DEFAULT_HISTOGRAM_BINS;
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::error::ViewError;
use crate::views::{self, ClusterView, DistributionView, InstanceRecord, KeywordView, Page, QuerySpec, SetFilter, SortKey, Summary};

/// Shared, read-mostly server state. The saliency cache is the only thing
/// that changes after startup.
pub struct AppState {
    bundle: Option<Arc<AnalysisBundle>>,
    saliency: SaliencyConfig,
    saliency_cache: RwLock<HashMap<u64, Arc<InstanceSaliency>>>,
    default_bins: usize,
}

impl AppState {
    pub fn new(bundle: AnalysisBundle) -> Self {
        let saliency = bundle.config.saliency;
        Self { bundle: Some(Arc::new(bundle)), saliency, saliency_cache: RwLock::default(), default_bins: DEFAULT_HISTOGRAM_BINS }
    }

    /// A server with nothing analyzed; every data endpoint answers `not_analyzed`.
    pub fn empty() -> Self {
        Self {
            bundle: None,
            saliency: SaliencyConfig::default(),
            saliency_cache: RwLock::default(),
            default_bins: DEFAULT_HISTOGRAM_BINS,
        }
    }

    /// Histogram bin count used when a request names none.
    pub fn with_default_bins(mut self, bins: usize) -> Self {
        self.default_bins = bins;
        self
    }

    pub fn bundle(&self) -> Result<&AnalysisBundle, ViewError> {
        self.bundle.as_deref().ok_or(ViewError::NotAnalyzed)
    }

    pub fn saliency(&self, id: u64) -> Result<Arc<InstanceSaliency>, ViewError> {
        if let Some(hit) = self.saliency_cache.read().expect("saliency cache lock").get(&id) {
            return Ok(hit.clone());
        }
        let computed = Arc::new(instance_saliency(&self.bundle()?.dataset, id, &self.saliency)?);
        // Concurrent misses compute the same value; whichever lands last wins.
        self.saliency_cache.write().expect("saliency cache lock").insert(id, computed.clone());
        Ok(computed)
    }

    pub fn cached_saliency_count(&self) -> usize {
        self.saliency_cache.read().expect("saliency cache lock").len()
    }
}

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ViewError>;

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ViewError> {
    q.map(|Query(v)| v).map_err(|e| ViewError::invalid("query", e.body_text()))
}

fn path<T>(p: Result<Path<T>, PathRejection>) -> Result<T, ViewError> {
    p.map(|Path(v)| v).map_err(|e| ViewError::invalid("path", e.body_text()))
}

fn parse<T: std::str::FromStr>(name: &'static str, raw: Option<&str>) -> Result<Option<T>, ViewError>
where
    T::Err: std::fmt::Display,
{
    raw.filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| ViewError::invalid(name, format!("{s:?}: {e}"))))
        .transpose()
}

fn parse_threshold(raw: Option<&str>) -> Result<Option<f64>, ViewError> {
    let t = parse::<f64>("threshold", raw)?;
    views::check_threshold(t)?;
    Ok(t)
}

#[derive(Debug, Default, Deserialize)]
struct ThresholdParams {
    threshold: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct DistributionParams {
    threshold: Option<String>,
    bins: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct InstanceParams {
    split: Option<String>,
    set: Option<String>,
    cluster: Option<String>,
    q: Option<String>,
    sort: Option<String>,
    page: Option<String>,
    page_size: Option<String>,
    threshold: Option<String>,
}

impl InstanceParams {
    fn spec(&self) -> Result<QuerySpec, ViewError> {
        let split = match self.split.as_deref() {
            None | Some("") | Some("test") => Split::Test,
            Some("train") => Split::Train,
            Some(other) => return Err(ViewError::invalid("split", format!("{other:?} is not one of train, test"))),
        };
        let set = match self.set.as_deref() {
            None | Some("") | Some("ood") => SetFilter::Ood,
            Some("id") => SetFilter::Id,
            Some("all") => SetFilter::All,
            Some(other) => return Err(ViewError::invalid("set", format!("{other:?} is not one of id, ood, all"))),
        };
        Ok(QuerySpec {
            split,
            set,
            cluster: parse("cluster", self.cluster.as_deref())?,
            search: self.q.clone(),
            sort: self.sort.as_deref().filter(|s| !s.is_empty()).map(SortKey::parse).transpose()?,
            page: parse("page", self.page.as_deref())?.unwrap_or(0),
            page_size: parse("page_size", self.page_size.as_deref())?.unwrap_or(views::DEFAULT_PAGE_SIZE),
            threshold: parse_threshold(self.threshold.as_deref())?,
        })
    }
}

#[derive(Debug, Default, Deserialize)]
struct KeywordParams {
    ood_only: Option<String>,
    threshold: Option<String>,
}

async fn summary(State(s): Shared) -> ApiResult<Summary> {
    Ok(Json(views::summary(s.bundle()?)))
}

async fn distribution(State(s): Shared, q: Result<Query<DistributionParams>, QueryRejection>) -> ApiResult<DistributionView> {
    let q = query(q)?;
    let threshold = parse_threshold(q.threshold.as_deref())?;
    let bins = parse("bins", q.bins.as_deref())?.unwrap_or(s.default_bins);
    Ok(Json(views::distribution(s.bundle()?, threshold, Some(bins))?))
}

async fn instances(State(s): Shared, q: Result<Query<InstanceParams>, QueryRejection>) -> ApiResult<Page> {
    let spec = query(q)?.spec()?;
    Ok(Json(views::query_instances(s.bundle()?, &spec)?))
}

async fn instance(
    State(s): Shared,
    id: Result<Path<u64>, PathRejection>,
    q: Result<Query<ThresholdParams>, QueryRejection>,
) -> ApiResult<InstanceRecord> {
    let id = path(id)?;
    let threshold = parse_threshold(query(q)?.threshold.as_deref())?;
    Ok(Json(views::instance(s.bundle()?, id, threshold)?))
}

async fn saliency(State(s): Shared, id: Result<Path<u64>, PathRejection>) -> ApiResult<InstanceSaliency> {
    let id = path(id)?;
    s.bundle()?;
    let state = s.clone();
    let r = tokio::task::spawn_blocking(move || state.saliency(id))
        .await
        .map_err(|e| ViewError::Saliency(e.to_string()))??;
    Ok(Json((*r).clone()))
}

async fn clusters(State(s): Shared) -> ApiResult<ClusterView> {
    Ok(Json(views::cluster_geometry(s.bundle.as_deref())?))
}

async fn cluster_keywords(
    State(s): Shared,
    k: Result<Path<usize>, PathRejection>,
    q: Result<Query<KeywordParams>, QueryRejection>,
) -> ApiResult<KeywordView> {
    let k = path(k)?;
    let q = query(q)?;
    let ood_only = match q.ood_only.as_deref() {
        None | Some("") | Some("false") | Some("0") => false,
        Some("true") | Some("1") => true,
        Some(other) => return Err(ViewError::invalid("ood_only", format!("{other:?} is not a boolean"))),
    };
    let threshold = parse_threshold(q.threshold.as_deref())?;
    Ok(Json(views::keywords(s.bundle()?, k, ood_only, threshold)?))
}

async fn no_route(uri: Uri) -> ViewError {
    ViewError::NoRoute(uri.path().to_string())
}

/// API routes, plus static UI assets from `ui_dir` when given.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/summary", get(summary))
        .route("/api/distribution", get(distribution))
        .route("/api/instances", get(instances))
        .route("/api/instances/{id}", get(instance))
        .route("/api/instances/{id}/saliency", get(saliency))
        .route("/api/clusters", get(clusters))
        .route("/api/clusters/{k}/keywords", get(cluster_keywords))
        .route("/api/{*rest}", get(no_route))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(no_route),
    }
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, state, ui_dir).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: Arc<AppState>, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
