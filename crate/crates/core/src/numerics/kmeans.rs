use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NumericsError;
use crate::matrix::{squared_distance, Matrix};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult<T> {
    pub labels: Vec<usize>,
    /// `k x p`.
    pub centroids: Matrix<T>,
    /// Sum of squared distances of each point to its assigned centroid.
    pub inertia: T,
    /// Inertia after the initial assignment and after every Lloyd iteration.
    pub inertia_trace: Vec<T>,
    pub n_iter: usize,
}

/// k-means++ seeding followed by Lloyd iterations until the relative inertia
/// improvement drops below `1e-4` or 300 iterations pass.
pub fn kmeans<T: Scalar>(data: &Matrix<T>, k: usize, seed: u64) -> Result<KMeansResult<T>, NumericsError> {
    kmeans_with(data, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL)
}

pub fn kmeans_with<T: Scalar>(
    data: &Matrix<T>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult<T>, NumericsError> {
    let n = data.rows();
    if k == 0 {
        return Err(NumericsError::ZeroParameter("k"));
    }
    if k > n {
        return Err(NumericsError::TooManyClusters { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let mut state = Bounds::assign_all(data, &centroids);
    let mut inertia = state.inertia(data, &centroids);
    let mut trace = vec![inertia];
    let mut n_iter = 0;

    while n_iter < max_iter {
        n_iter += 1;
        let moved = update_centroids(data, &state.labels, &state.upper, &mut centroids);
        if moved.relocated {
            state = Bounds::assign_all(data, &centroids);
        } else {
            state.shift(&moved.shift);
            state.reassign(data, &centroids);
        }
        let next = state.inertia(data, &centroids);
        trace.push(next);
        let prev = inertia;
        inertia = next;
        if next == T::zero() || (prev - next).as_f64() <= tol * prev.as_f64() {
            break;
        }
    }

    // Exit guarantee: labels are exactly the nearest centroids.
    let (labels, changed) = nearest_labels(data, &centroids, &state.labels);
    if changed {
        inertia = labels
            .iter()
            .enumerate()
            .map(|(i, &c)| squared_distance(data.row(i), centroids.row(c)))
            .sum();
        if let Some(last) = trace.last_mut() {
            *last = inertia;
        }
    }
    Ok(KMeansResult { labels, centroids, inertia, inertia_trace: trace, n_iter })
}

fn plus_plus_init<T: Scalar>(data: &Matrix<T>, k: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = data.row_iter().map(|r| squared_distance(r, data.row(chosen[0])).as_f64()).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the last partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        let c = data.row(next);
        for (i, w) in d2.iter_mut().enumerate() {
            let d = squared_distance(data.row(i), c).as_f64();
            if d < *w {
                *w = d;
            }
        }
    }
    Matrix::from_fn(k, data.cols(), |i, j| data.get(chosen[i], j))
}

struct Moved<T> {
    shift: Vec<T>,
    relocated: bool,
}

/// Moves each centroid to its members' mean. An empty cluster takes the point
/// farthest from its own centroid.
fn update_centroids<T: Scalar>(data: &Matrix<T>, labels: &[usize], upper: &[T], centroids: &mut Matrix<T>) -> Moved<T> {
    let (k, p) = centroids.shape();
    let mut sums = Matrix::<T>::zeros(k, p);
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, &v) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    let mut shift = vec![T::zero(); k];
    let mut relocated = false;
    let mut taken = vec![false; data.rows()];
    for c in 0..k {
        let new: Vec<T> = if counts[c] > 0 {
            let inv = T::one() / T::of_usize(counts[c]);
            sums.row(c).iter().map(|&s| s * inv).collect()
        } else {
            relocated = true;
            let far = (0..data.rows())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| upper[a].partial_cmp(&upper[b]).expect("finite").then(b.cmp(&a)))
                .expect("k <= n leaves a free point");
            taken[far] = true;
            data.row(far).to_vec()
        };
        shift[c] = squared_distance(centroids.row(c), &new).sqrt();
        centroids.row_mut(c).copy_from_slice(&new);
    }
    Moved { shift, relocated }
}

/// Hamerly bounds: `upper[i]` bounds the distance to the assigned centroid
/// from above, `lower[i]` bounds the distance to every other centroid from below.
struct Bounds<T> {
    labels: Vec<usize>,
    upper: Vec<T>,
    lower: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    fn assign_all(data: &Matrix<T>, centroids: &Matrix<T>) -> Self {
        let n = data.rows();
        let mut b = Self { labels: vec![0; n], upper: vec![T::zero(); n], lower: vec![T::zero(); n] };
        for i in 0..n {
            let (best, d1, d2) = two_nearest(data.row(i), centroids);
            b.labels[i] = best;
            b.upper[i] = d1;
            b.lower[i] = d2;
        }
        b
    }

    fn shift(&mut self, shift: &[T]) {
        let (mut m1, mut m2, mut arg) = (T::zero(), T::zero(), usize::MAX);
        for (c, &s) in shift.iter().enumerate() {
            if s > m1 {
                m2 = m1;
                m1 = s;
                arg = c;
            } else if s > m2 {
                m2 = s;
            }
        }
        for i in 0..self.labels.len() {
            let a = self.labels[i];
            self.upper[i] += shift[a];
            let other = if a == arg { m2 } else { m1 };
            self.lower[i] = (self.lower[i] - other).max(T::zero());
        }
    }

    fn reassign(&mut self, data: &Matrix<T>, centroids: &Matrix<T>) {
        let half_sep = half_separation(centroids);
        for i in 0..self.labels.len() {
            let a = self.labels[i];
            let bound = half_sep[a].max(self.lower[i]);
            if self.upper[i] <= bound {
                continue;
            }
            self.upper[i] = squared_distance(data.row(i), centroids.row(a)).sqrt();
            if self.upper[i] <= bound {
                continue;
            }
            let (best, d1, d2) = two_nearest(data.row(i), centroids);
            self.labels[i] = best;
            self.upper[i] = d1;
            self.lower[i] = d2;
        }
    }

    /// Exact inertia; also tightens every upper bound to the true distance.
    fn inertia(&mut self, data: &Matrix<T>, centroids: &Matrix<T>) -> T {
        let mut total = T::zero();
        for i in 0..self.labels.len() {
            let d2 = squared_distance(data.row(i), centroids.row(self.labels[i]));
            self.upper[i] = d2.sqrt();
            total += d2;
        }
        total
    }
}

/// Half the distance from each centroid to its closest other centroid.
fn half_separation<T: Scalar>(centroids: &Matrix<T>) -> Vec<T> {
    let k = centroids.rows();
    let mut out = vec![T::infinity(); k];
    for a in 0..k {
        for b in a + 1..k {
            let d = squared_distance(centroids.row(a), centroids.row(b)).sqrt() * T::of(0.5);
            if d < out[a] {
                out[a] = d;
            }
            if d < out[b] {
                out[b] = d;
            }
        }
    }
    out
}

/// `(argmin, nearest distance, second-nearest distance)`; first index wins ties.
fn two_nearest<T: Scalar>(x: &[T], centroids: &Matrix<T>) -> (usize, T, T) {
    let (mut best, mut d1, mut d2) = (0, T::infinity(), T::infinity());
    for (c, row) in centroids.row_iter().enumerate() {
        let d = squared_distance(x, row);
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = c;
        } else if d < d2 {
            d2 = d;
        }
    }
    (best, d1.sqrt(), d2.sqrt())
}

fn nearest_labels<T: Scalar>(data: &Matrix<T>, centroids: &Matrix<T>, current: &[usize]) -> (Vec<usize>, bool) {
    let mut changed = false;
    let labels = data
        .row_iter()
        .zip(current)
        .map(|(x, &cur)| {
            let (best, _, _) = two_nearest(x, centroids);
            if best != cur {
                changed = true;
            }
            best
        })
        .collect();
    (labels, changed)
}
