//! Thin SVD for tall matrices: Householder QR, then one-sided Jacobi on `R`.

use crate::matrix::{dot, Matrix};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// Singular values (descending) and matching right singular vectors of a
/// matrix with `rows >= cols`.
pub(crate) struct RightSvd<T> {
    pub singular: Vec<T>,
    /// Column-major: `vectors[i]` is the i-th right singular vector.
    pub vectors: Vec<Vec<T>>,
}

/// Upper-triangular `R` of `A = QR`, returned as columns.
fn householder_r<T: Scalar>(a: &Matrix<T>) -> Vec<Vec<T>> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v = vec![T::zero(); m];
    for j in 0..n.min(m) {
        let x = &cols[j][j..];
        let norm = dot(x, x).sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if x[0] > T::zero() { -norm } else { norm };
        let v = &mut v[j..];
        v.copy_from_slice(x);
        v[0] -= alpha;
        let vnorm2 = dot(v, v);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::one() + T::one();
        for col in cols.iter_mut().skip(j) {
            let tail = &mut col[j..];
            let f = two * dot(v, tail) / vnorm2;
            for (t, &vi) in tail.iter_mut().zip(v.iter()) {
                *t -= f * vi;
            }
        }
        // Exact zeros below the diagonal.
        cols[j][j] = alpha;
        for t in cols[j][j + 1..].iter_mut() {
            *t = T::zero();
        }
    }
    cols.into_iter().map(|mut c| {
        c.truncate(n);
        c
    })
    .collect()
}

/// One-sided (Hestenes) Jacobi on the columns of a square matrix.
fn jacobi<T: Scalar>(mut cols: Vec<Vec<T>>) -> RightSvd<T> {
    let n = cols.len();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let tol = T::epsilon() * T::of_usize(n.max(1));
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(T, usize)> = cols.iter().enumerate().map(|(i, c)| (dot(c, c).sqrt(), i)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite singular values").then(a.1.cmp(&b.1)));
    RightSvd {
        singular: order.iter().map(|&(s, _)| s).collect(),
        vectors: order.iter().map(|&(_, i)| v[i].clone()).collect(),
    }
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

pub(crate) fn right_svd<T: Scalar>(a: &Matrix<T>) -> RightSvd<T> {
    assert!(a.rows() >= a.cols(), "right_svd expects a tall matrix");
    jacobi(householder_r(a))
}

/// Modified Gram-Schmidt over `vectors`, replacing any vector that collapses
/// to zero with the first standard basis vector that stays independent.
pub(crate) fn orthonormalize<T: Scalar>(vectors: &mut [Vec<T>]) {
    let dim = vectors.first().map_or(0, Vec::len);
    let tiny = T::epsilon().sqrt();
    let mut next_basis = 0;
    for i in 0..vectors.len() {
        loop {
            let (done, rest) = vectors.split_at_mut(i);
            let v = &mut rest[0];
            for u in done.iter() {
                let proj = dot(u, v);
                for (vk, &uk) in v.iter_mut().zip(u) {
                    *vk -= proj * uk;
                }
            }
            let norm = dot(v, v).sqrt();
            if norm > tiny {
                for vk in v.iter_mut() {
                    *vk /= norm;
                }
                break;
            }
            assert!(next_basis < dim, "cannot complete an orthonormal basis");
            v.iter_mut().for_each(|x| *x = T::zero());
            v[next_basis] = T::one();
            next_basis += 1;
        }
    }
}
