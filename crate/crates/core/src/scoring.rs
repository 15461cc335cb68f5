//! Maximum-softmax-probability OOD scores, threshold rules and the
//! distribution summaries built on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, Split};
use crate::scalar::Scalar;

/// Allowed deviation of a probability row's sum from 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-4;
/// Bins of the pooled histogram the default threshold is searched over.
pub const THRESHOLD_BINS: usize = 256;
/// Threshold used when the score distribution gives no usable split.
pub const FALLBACK_THRESHOLD: f64 = 0.5;
pub const DEFAULT_ICONS: usize = 100;
pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("probability row is empty")]
    EmptyRow,
    #[error("probability row sums to {0}")]
    BadSum(f64),
    #[error("probability entry {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("degenerate score distribution")]
    Degenerate,
    #[error("icon array needs at least one instance")]
    NoInstances,
    #[error("{0} must be positive")]
    ZeroCount(&'static str),
}

/// `1 - max(row)`.
pub fn msp_score<T: Scalar>(row: &[T]) -> Result<T, ScoringError> {
    if row.is_empty() {
        return Err(ScoringError::EmptyRow);
    }
    let mut max = T::neg_infinity();
    let mut sum = 0.0f64;
    for &p in row {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(ScoringError::OutOfRange(p.as_f64()));
        }
        sum += p.as_f64();
        max = max.max(p);
    }
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(ScoringError::BadSum(sum));
    }
    Ok(T::one() - max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Id,
    Ood,
}

/// OOD iff `score > epsilon`; a score sitting on the threshold is ID.
#[inline]
pub fn classify<T: Scalar>(score: T, epsilon: T) -> Verdict {
    if score > epsilon {
        Verdict::Ood
    } else {
        Verdict::Id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    Precomputed,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub epsilon: f64,
    pub source: ThresholdSource,
}

/// Per-instance scores in dataset order, each tagged with its split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<T> {
    pub scores: Vec<T>,
    pub splits: Vec<Split>,
}

impl<T: Scalar> ScoreTable<T> {
    pub fn from_dataset(dataset: &Dataset) -> Result<Self, (usize, ScoringError)> {
        let mut scores = Vec::with_capacity(dataset.len());
        for (i, row) in dataset.probs.row_iter().enumerate() {
            let row: Vec<T> = row.iter().map(|&p| T::of(p as f64)).collect();
            scores.push(msp_score(&row).map_err(|e| (i, e))?);
        }
        Ok(Self { scores, splits: dataset.instances.iter().map(|i| i.split).collect() })
    }

    pub fn split_scores(&self, split: Split) -> Vec<T> {
        self.scores.iter().zip(&self.splits).filter(|(_, &s)| s == split).map(|(&v, _)| v).collect()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.splits.iter().filter(|&&s| s == split).count()
    }

    /// `(id_count, ood_count)` for one split at `epsilon`.
    pub fn counts(&self, split: Split, epsilon: T) -> (usize, usize) {
        let mut ood = 0;
        let mut total = 0;
        for (&v, &s) in self.scores.iter().zip(&self.splits) {
            if s == split {
                total += 1;
                if classify(v, epsilon) == Verdict::Ood {
                    ood += 1;
                }
            }
        }
        (total - ood, ood)
    }
}

/// Otsu threshold over the pooled train and test scores.
///
/// Candidates are the lower edges `k / 256`, `k = 0..256`. A candidate splits
/// the scores into `s <= edge` (ID) and `s > edge` (OOD); the one maximizing
/// between-class variance `w0 * w1 * (mu0 - mu1)^2` wins, smallest edge on ties.
pub fn default_threshold<T: Scalar>(train: &[T], test: &[T]) -> Result<f64, ScoringError> {
    let bins = THRESHOLD_BINS;
    let mut counts = vec![0usize; bins];
    let mut sums = vec![0.0f64; bins];
    let mut first: Option<f64> = None;
    let mut distinct = false;
    for v in train.iter().chain(test).map(|v| v.as_f64()) {
        // Bin k holds (k/256, (k+1)/256]; bin 0 also takes 0. Scaling by 256 is exact.
        let b = ((v * bins as f64).ceil() as usize).saturating_sub(1).min(bins - 1);
        counts[b] += 1;
        sums[b] += v;
        match first {
            None => first = Some(v),
            Some(f) if f != v => distinct = true,
            _ => {}
        }
    }
    if !distinct {
        return Err(ScoringError::Degenerate);
    }
    let total_n: usize = counts.iter().sum();
    let total_sum: f64 = sums.iter().sum();
    let (mut n0, mut s0) = (0usize, 0.0f64);
    let mut best: Option<(usize, f64)> = None;
    for k in 0..bins {
        if k > 0 {
            n0 += counts[k - 1];
            s0 += sums[k - 1];
        }
        let n1 = total_n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let mu0 = s0 / n0 as f64;
        let mu1 = (total_sum - s0) / n1 as f64;
        let w0 = n0 as f64 / total_n as f64;
        let w1 = n1 as f64 / total_n as f64;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((k, var));
        }
    }
    match best {
        Some((k, var)) if var > 0.0 => Ok(k as f64 / bins as f64),
        _ => Err(ScoringError::Degenerate),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
}

/// Index of the uniform bin over `[0, 1]` holding `v`; 1.0 lands in the last bin.
#[inline]
pub fn bin_index(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

pub fn histogram<T: Scalar>(table: &ScoreTable<T>, bins: usize) -> Result<Histogram, ScoringError> {
    if bins == 0 {
        return Err(ScoringError::ZeroCount("bins"));
    }
    let bin_edges = (0..=bins).map(|k| k as f64 / bins as f64).collect();
    let mut train_counts = vec![0; bins];
    let mut test_counts = vec![0; bins];
    for (&v, &s) in table.scores.iter().zip(&table.splits) {
        let b = bin_index(v.as_f64(), bins);
        match s {
            Split::Train => train_counts[b] += 1,
            Split::Test => test_counts[b] += 1,
        }
    }
    Ok(Histogram { bin_edges, train_counts, test_counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IconArray {
    pub total_icons: usize,
    pub id_icons: usize,
    pub ood_icons: usize,
}

/// Splits `total_icons` between ID and OOD by largest-remainder rounding.
/// Equal remainders favor the ID side.
pub fn icon_array(n_id: usize, n_ood: usize, total_icons: usize) -> Result<IconArray, ScoringError> {
    let n = n_id + n_ood;
    if n == 0 {
        return Err(ScoringError::NoInstances);
    }
    if total_icons == 0 {
        return Err(ScoringError::ZeroCount("total_icons"));
    }
    // Integer arithmetic keeps the remainders exact.
    let id_floor = n_id * total_icons / n;
    let ood_floor = n_ood * total_icons / n;
    let id_rem = n_id * total_icons % n;
    let ood_rem = n_ood * total_icons % n;
    // The remainders sum to 0 or n, so at most one icon is left over.
    let (mut id_icons, mut ood_icons) = (id_floor, ood_floor);
    if id_floor + ood_floor < total_icons {
        if id_rem >= ood_rem {
            id_icons += 1;
        } else {
            ood_icons += 1;
        }
    }
    Ok(IconArray { total_icons, id_icons, ood_icons })
}
