//! Salient-word groups from an instance's token activations.
//!
//! The activation matrix (neurons x tokens) is clamped to be non-negative and
//! factorized with NMF. Each token joins the factor with the largest weight in
//! its column of `H`; stopwords and special tokens are dropped from every
//! group, empty groups disappear, and each group keeps its heaviest tokens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, IngestError};
use crate::matrix::Matrix;
use crate::numerics::{self, NumericsError};
use crate::scalar::Scalar;
use crate::text::is_stopword;

const RESERVED_MARKERS: [&str; 5] = ["[CLS]", "[SEP]", "[PAD]", "[UNK]", "[MASK]"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaliencyConfig {
    pub n_factors: usize,
    pub top_words: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self { n_factors: 10, top_words: 10, max_iter: numerics::nmf::DEFAULT_MAX_ITER, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientToken {
    pub token_index: usize,
    pub token: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorGroup {
    pub factor_id: usize,
    /// Heaviest first; ties by position.
    pub members: Vec<SalientToken>,
    /// This factor's weight on every token of the text.
    pub weight_series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyResult {
    pub groups: Vec<FactorGroup>,
    pub token_count: usize,
}

/// Saliency for one instance; exporters may skip instances entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum InstanceSaliency {
    Ok {
        id: u64,
        tokens: Vec<String>,
        #[serde(flatten)]
        result: SaliencyResult,
    },
    NoActivations {
        id: u64,
    },
}

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("activations have {cols} columns but there are {tokens} tokens")]
    DimensionMismatch { cols: usize, tokens: usize },
    #[error("no tokens to explain")]
    NoTokens,
    #[error("invalid saliency config: {0}")]
    Config(&'static str),
    #[error("unknown instance {0}")]
    UnknownInstance(u64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Punctuation-only tokens, reserved markers and single characters.
pub fn is_special_token(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric) || RESERVED_MARKERS.contains(&token) || token.chars().count() < 2
}

fn is_filtered(token: &str) -> bool {
    is_special_token(token) || is_stopword(token)
}

pub fn extract_saliency<T: Scalar>(
    activations: &Matrix<T>,
    tokens: &[String],
    config: &SaliencyConfig,
) -> Result<SaliencyResult, SaliencyError> {
    if tokens.is_empty() {
        return Err(SaliencyError::NoTokens);
    }
    if activations.cols() != tokens.len() {
        return Err(SaliencyError::DimensionMismatch { cols: activations.cols(), tokens: tokens.len() });
    }
    if config.n_factors == 0 {
        return Err(SaliencyError::Config("n_factors must be positive"));
    }
    if config.top_words == 0 {
        return Err(SaliencyError::Config("top_words must be positive"));
    }
    let mut clamped = activations.clone();
    for v in clamped.as_mut_slice() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let n = config.n_factors.min(clamped.rows()).min(clamped.cols());
    let fact = numerics::nmf(&clamped, n, config.max_iter, config.seed)?;
    let h = fact.h.cast::<f64>();

    let mut members: Vec<Vec<SalientToken>> = vec![Vec::new(); n];
    for (j, token) in tokens.iter().enumerate() {
        let mut best = 0;
        for i in 1..n {
            if h.get(i, j) > h.get(best, j) {
                best = i;
            }
        }
        if !is_filtered(token) {
            members[best].push(SalientToken { token_index: j, token: token.clone(), weight: h.get(best, j) });
        }
    }
    let groups = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(factor_id, mut m)| {
            m.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.token_index.cmp(&b.token_index)));
            m.truncate(config.top_words);
            FactorGroup { factor_id, members: m, weight_series: h.row(factor_id).to_vec() }
        })
        .collect();
    Ok(SaliencyResult { groups, token_count: tokens.len() })
}

/// Saliency for the instance with `id`, or `NoActivations` when none were exported.
pub fn instance_saliency(dataset: &Dataset, id: u64, config: &SaliencyConfig) -> Result<InstanceSaliency, SaliencyError> {
    let pos = dataset.position(id).ok_or(SaliencyError::UnknownInstance(id))?;
    let Some(acts) = dataset.activations.get(id)? else {
        return Ok(InstanceSaliency::NoActivations { id });
    };
    let tokens = dataset.instances[pos].tokens.clone();
    let result = extract_saliency(&acts.cast::<f64>(), &tokens, config)?;
    Ok(InstanceSaliency::Ok { id, tokens, result })
}
