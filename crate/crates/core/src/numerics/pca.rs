use serde::{Deserialize, Serialize};

use super::linalg::{orthonormalize, right_svd};
use super::NumericsError;
use crate::matrix::{dot, Matrix};
use crate::scalar::Scalar;

/// Principal axes of centered data, from the SVD of the data itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// `p x d`, rows orthonormal.
    pub components: Matrix<T>,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<T>,
    /// Sum of the per-feature sample variances of the training data.
    pub total_variance: T,
    pub n_samples: usize,
}

impl<T: Scalar> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }
}

/// Fits `min(p, d, n - 1)` components.
///
/// Each component is oriented so that its entry of largest magnitude is
/// positive (first such entry on ties).
pub fn pca_fit<T: Scalar>(data: &Matrix<T>, p: usize) -> Result<PcaModel<T>, NumericsError> {
    let (n, d) = data.shape();
    if n < 2 {
        return Err(NumericsError::TooFewSamples { need: 2, got: n });
    }
    if p == 0 {
        return Err(NumericsError::ZeroParameter("p"));
    }
    let p = p.min(d).min(n - 1);

    let mut mean = vec![T::zero(); d];
    for r in data.row_iter() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    let inv_n = T::one() / T::of_usize(n);
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut centered = data.clone();
    for i in 0..n {
        for (v, &m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let dof = T::of_usize(n - 1);
    let total_variance = centered.as_slice().iter().map(|&v| v * v).sum::<T>() / dof;

    let (singular, mut vectors) = if n >= d {
        let svd = right_svd(&centered);
        (svd.singular, svd.vectors)
    } else {
        // Wide data: right singular vectors of X are X^T w_i / sigma_i for the
        // right singular vectors w_i of X^T.
        let xt = centered.transpose();
        let svd = right_svd(&xt);
        let vectors = svd
            .vectors
            .iter()
            .zip(&svd.singular)
            .map(|(w, &s)| {
                (0..d)
                    .map(|j| if s > T::zero() { dot(xt.row(j), w) / s } else { T::zero() })
                    .collect::<Vec<T>>()
            })
            .collect();
        (svd.singular, vectors)
    };
    vectors.truncate(p);
    orthonormalize(&mut vectors);
    for v in vectors.iter_mut() {
        let mut lead = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = j;
            }
        }
        if v[lead] < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let components = Matrix::from_fn(p, d, |i, j| vectors[i][j]);
    let explained_variance = singular.iter().take(p).map(|&s| s * s / dof).collect();
    Ok(PcaModel { mean, components, explained_variance, total_variance, n_samples: n })
}

/// `(F - mean) * components^T`.
pub fn pca_transform<T: Scalar>(model: &PcaModel<T>, data: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    let d = model.mean.len();
    if data.cols() != d {
        return Err(NumericsError::DimensionMismatch { expected: d, got: data.cols() });
    }
    let p = model.n_components();
    let mut out = Matrix::zeros(data.rows(), p);
    let mut centered = vec![T::zero(); d];
    for i in 0..data.rows() {
        for ((c, &v), &m) in centered.iter_mut().zip(data.row(i)).zip(&model.mean) {
            *c = v - m;
        }
        for k in 0..p {
            out.set(i, k, dot(&centered, model.components.row(k)));
        }
    }
    Ok(out)
}
