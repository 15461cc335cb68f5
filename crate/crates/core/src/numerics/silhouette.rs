use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::NumericsError;
use crate::matrix::{squared_distance, Matrix};
use crate::scalar::Scalar;

pub const DEFAULT_SAMPLE_CAP: usize = 1000;

/// Mean silhouette coefficient. When `n > sample_cap` it is averaged over a
/// seeded uniform subsample of `sample_cap` points; their `a` and `b` are still
/// measured against every point.
pub fn silhouette_mean<T: Scalar>(
    data: &Matrix<T>,
    labels: &[usize],
    sample_cap: usize,
    seed: u64,
) -> Result<f64, NumericsError> {
    SilhouetteSampler::new(data, sample_cap, seed)?.score(labels)
}

/// Distances from the evaluated points to all points, computed once so that
/// many labelings of the same data can be scored cheaply.
#[derive(Debug, Clone)]
pub struct SilhouetteSampler {
    sample: Vec<usize>,
    n: usize,
    /// Row `s` holds distances from `sample[s]` to every point.
    distances: Vec<f64>,
}

impl SilhouetteSampler {
    pub fn new<T: Scalar>(data: &Matrix<T>, sample_cap: usize, seed: u64) -> Result<Self, NumericsError> {
        if sample_cap == 0 {
            return Err(NumericsError::ZeroParameter("sample_cap"));
        }
        let n = data.rows();
        let sample: Vec<usize> = if n > sample_cap {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, sample_cap).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..n).collect()
        };
        let mut distances = Vec::with_capacity(sample.len() * n);
        for &i in &sample {
            let xi = data.row(i);
            distances.extend(data.row_iter().map(|xj| squared_distance(xi, xj).as_f64().sqrt()));
        }
        Ok(Self { sample, n, distances })
    }

    pub fn sample(&self) -> &[usize] {
        &self.sample
    }

    pub fn score(&self, labels: &[usize]) -> Result<f64, NumericsError> {
        if labels.len() != self.n {
            return Err(NumericsError::DimensionMismatch { expected: self.n, got: labels.len() });
        }
        // Dense relabeling: clusters are the distinct label values.
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() < 2 {
            return Err(NumericsError::SingleCluster);
        }
        let dense: Vec<usize> = labels.iter().map(|l| ids.binary_search(l).expect("present")).collect();
        let k = ids.len();
        let mut counts = vec![0usize; k];
        for &c in &dense {
            counts[c] += 1;
        }
        let mut sums = vec![0.0f64; k];
        let mut total = 0.0;
        for (s, &i) in self.sample.iter().enumerate() {
            sums.iter_mut().for_each(|v| *v = 0.0);
            let row = &self.distances[s * self.n..(s + 1) * self.n];
            for (&d, &c) in row.iter().zip(&dense) {
                sums[c] += d;
            }
            let own = dense[i];
            if counts[own] == 1 {
                continue;
            }
            let a = sums[own] / (counts[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                total += (b - a) / m;
            }
        }
        Ok(total / self.sample.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_tight_far_pairs() {
        let data = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.01, 0.0], vec![10.0, 10.0], vec![10.0, 10.01]]).unwrap();
        let s = silhouette_mean(&data, &[0, 0, 1, 1], 1000, 0).unwrap();
        assert!(s > 0.95, "{s}");
    }

    #[test]
    fn single_cluster_is_an_error() {
        let data = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(silhouette_mean(&data, &[3, 3], 10, 0), Err(NumericsError::SingleCluster)));
    }

    #[test]
    fn singletons_contribute_zero() {
        let data = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        let s = silhouette_mean(&data, &[0, 0, 1], 10, 0).unwrap();
        // points 0 and 1: a = 1, b = 10 and 9
        let want = ((10.0 - 1.0) / 10.0 + (9.0 - 1.0) / 9.0) / 3.0;
        assert!((s - want).abs() < 1e-12);
    }

    #[test]
    fn subsample_is_seeded() {
        let data = Matrix::from_fn(50, 2, |i, j| ((i * 7 + j) % 13) as f64);
        let a = SilhouetteSampler::new(&data, 10, 5).unwrap();
        let b = SilhouetteSampler::new(&data, 10, 5).unwrap();
        assert_eq!(a.sample(), b.sample());
        assert_eq!(a.sample().len(), 10);
    }
}
