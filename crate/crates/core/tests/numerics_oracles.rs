use nalgebra::{DMatrix, SymmetricEigen};
use oodlens_core::metrics::adjusted_rand_index;
use oodlens_core::numerics::{self, kmeans, nmf_observed, pca_fit, pca_transform, silhouette_mean, NumericsError};
use oodlens_core::{fixtures, Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, j| rng.random_range(-1.0..1.0) * (j + 1) as f64)
}

/// Eigenvalues of the sample covariance, descending, via a dense symmetric solver.
fn covariance_eigenvalues(data: &Matrix<f64>) -> Vec<f64> {
    let (n, d) = data.shape();
    let x = DMatrix::from_row_slice(n, d, data.as_slice());
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

#[test]
fn pca_variances_match_covariance_eigenvalues() {
    for seed in 0..5 {
        let data = random_matrix(50, 5, seed);
        let model = pca_fit(&data, 5).unwrap();
        let oracle = covariance_eigenvalues(&data);
        for (got, want) in model.explained_variance.iter().zip(&oracle) {
            assert!((got - want).abs() <= 1e-6 * want.abs(), "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn pca_wide_data_matches_oracle() {
    let data = random_matrix(6, 20, 9);
    let model = pca_fit(&data, 10).unwrap();
    assert_eq!(model.n_components(), 5);
    let oracle = covariance_eigenvalues(&data);
    for (got, want) in model.explained_variance.iter().zip(&oracle) {
        assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn pca_reconstruction_error_is_discarded_variance() {
    let data = random_matrix(40, 6, 77);
    let (n, d) = data.shape();
    let total_var = covariance_eigenvalues(&data).iter().sum::<f64>();
    for p in 1..=d {
        let model = pca_fit(&data, p).unwrap();
        let z = pca_transform(&model, &data).unwrap();
        // Direct reconstruction: mean + z * components.
        let mut err = 0.0;
        for i in 0..n {
            for j in 0..d {
                let recon: f64 = model.mean[j] + (0..p).map(|k| z.get(i, k) * model.components.get(k, j)).sum::<f64>();
                err += (data.get(i, j) - recon).powi(2);
            }
        }
        let kept: f64 = model.explained_variance.iter().sum();
        let want = (total_var - kept) * (n as f64 - 1.0);
        assert!((err - want).abs() <= 1e-5 * want.max(1e-9) + 1e-9, "p={p}: {err} vs {want}");
    }
}

#[test]
fn pca_transform_is_centered() {
    let data = random_matrix(30, 4, 5);
    let model = pca_fit(&data, 3).unwrap();
    let z = pca_transform(&model, &data).unwrap();
    for k in 0..3 {
        let mean: f64 = z.column(k).iter().sum::<f64>() / 30.0;
        assert!(mean.abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pca_components_orthonormal(rows in 3usize..30, cols in 1usize..9, p in 1usize..10, seed in any::<u64>()) {
        let data = random_matrix(rows, cols, seed);
        let model = pca_fit(&data, p).unwrap();
        let g = model.components.matmul(&model.components.transpose());
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g.get(i, j) - want).abs() < 1e-6);
            }
            // sign convention
            let row = model.components.row(i);
            let lead = row.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            prop_assert!(lead > 0.0);
        }
        for w in model.explained_variance.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }
}

fn blobs(k: usize, per: usize, dim: usize, sigma: f64, seed: u64) -> (Matrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = fixtures::separated_centers(k, dim, 1.0, 2.0, &mut rng);
    fixtures::gaussian_blobs(per, &centers, sigma, &mut rng)
}

#[test]
fn kmeans_recovers_separated_blobs() {
    let (data, truth) = blobs(3, 60, 4, 0.05, 21);
    let r = kmeans(&data, 3, 42).unwrap();
    assert_eq!(adjusted_rand_index(&r.labels, &truth), 1.0);
}

/// Brute-force nearest centroid, first index on ties.
fn nearest(x: &[f64], centroids: &Matrix<f64>) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for c in 0..centroids.rows() {
        let d: f64 = x.iter().zip(centroids.row(c)).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < bd {
            bd = d;
            best = c;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn kmeans_invariants(n in 5usize..80, dim in 1usize..5, k in 1usize..8, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let data = random_matrix(n, dim, seed);
        let r = kmeans(&data, k, seed ^ 0xabc).unwrap();
        prop_assert!(r.labels.iter().all(|&l| l < k));
        for (i, &l) in r.labels.iter().enumerate() {
            prop_assert_eq!(l, nearest(data.row(i), &r.centroids));
        }
        let inertia: f64 = (0..n)
            .map(|i| data.row(i).iter().zip(r.centroids.row(r.labels[i])).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        prop_assert!((inertia - r.inertia).abs() <= 1e-9 * (1.0 + inertia));
        for w in r.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        prop_assert_eq!(kmeans(&data, k, seed ^ 0xabc).unwrap(), r);
    }
}

/// Silhouette straight from the definition, over all points.
fn silhouette_oracle(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let k = labels.iter().max().unwrap() + 1;
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let size = labels.iter().filter(|&&l| l == own).count();
        if size == 1 {
            continue;
        }
        let a = (0..n).filter(|&j| j != i && labels[j] == own).map(|j| dist(&points[i], &points[j])).sum::<f64>()
            / (size - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && labels.contains(&c))
            .map(|c| {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                members.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

#[test]
fn silhouette_four_points_on_a_line() {
    let pts = [0.0, 0.1, 5.0, 5.1];
    let data = Matrix::from_vec(4, 1, pts.to_vec()).unwrap();
    let labels = [0, 0, 1, 1];
    let got = silhouette_mean(&data, &labels, 1000, 0).unwrap();
    let oracle = silhouette_oracle(&pts.iter().map(|&p| vec![p]).collect::<Vec<_>>(), &labels);
    assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    // closed form: a = 0.1 everywhere; b = 5.05, 4.95, 4.95, 5.05
    let closed = ((5.05 - 0.1) / 5.05 + (4.95 - 0.1) / 4.95 + (4.95 - 0.1) / 4.95 + (5.05 - 0.1) / 5.05) / 4.0;
    assert!((got - closed).abs() < 1e-9, "{got} vs {closed}");
}

#[test]
fn silhouette_single_cluster_errors() {
    let data = Matrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
    assert_eq!(silhouette_mean(&data, &[0, 0, 0], 10, 0), Err(NumericsError::SingleCluster));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn silhouette_matches_oracle_and_invariances(n in 4usize..40, k in 2usize..5, seed in any::<u64>(), shift in -50.0f64..50.0) {
        let data = random_matrix(n, 3, seed);
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let got = silhouette_mean(&data, &labels, 1000, 0).unwrap();
        let pts: Vec<Vec<f64>> = data.row_iter().map(|r| r.to_vec()).collect();
        prop_assert!((got - silhouette_oracle(&pts, &labels)).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&got));
        let renamed: Vec<usize> = labels.iter().map(|&l| (l + 1) % k).collect();
        prop_assert!((silhouette_mean(&data, &renamed, 1000, 0).unwrap() - got).abs() < 1e-12);
        let moved = Matrix::from_fn(n, 3, |i, j| data.get(i, j) + shift);
        prop_assert!((silhouette_mean(&moved, &labels, 1000, 0).unwrap() - got).abs() < 1e-9);
    }
}

#[test]
fn subsampled_silhouette_prefers_true_k() {
    let (data, truth) = blobs(4, 500, 5, 0.1, 8);
    let good = silhouette_mean(&data, &truth, 1000, 3).unwrap();
    // Merge blobs 2 and 3.
    let merged: Vec<usize> = truth.iter().map(|&l| l.min(2)).collect();
    let bad = silhouette_mean(&data, &merged, 1000, 3).unwrap();
    assert!(good > bad, "{good} vs {bad}");
}

fn frobenius_residual(a: &Matrix<f64>, w: &Matrix<f64>, h: &Matrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let mut wh = 0.0;
            for k in 0..w.cols() {
                wh += w.get(i, k) * h.get(k, j);
            }
            s += (a.get(i, j) - wh).powi(2);
        }
    }
    s.sqrt()
}

#[test]
fn nmf_objective_is_monotone() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let a = Matrix::from_fn(30, 20, |_, _| rng.random_range(0.0..1.0));
        let mut errors = Vec::new();
        let r = nmf_observed(&a, 5, 200, seed, |_, w, h| {
            assert!(w.as_slice().iter().chain(h.as_slice()).all(|&x| x >= 0.0));
            errors.push(frobenius_residual(&a, w, h));
        })
        .unwrap();
        assert_eq!(errors.len(), r.objective_trace.len());
        for w in errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
        }
        for (mine, theirs) in errors.iter().zip(&r.objective_trace) {
            assert!((mine - theirs).abs() < 1e-9);
        }
    }
}

#[test]
fn nmf_rank_one_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..2.0)).collect();
    let v: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..2.0)).collect();
    let a = Matrix::from_fn(30, 20, |i, j| u[i] * v[j]);
    let r = numerics::nmf(&a, 1, 200, 0).unwrap();
    assert!(frobenius_residual(&a, &r.w, &r.h) / a.frobenius_norm() < 1e-3);
}
