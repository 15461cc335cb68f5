use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NumericsError;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfResult<T> {
    /// `rows(A) x n`.
    pub w: Matrix<T>,
    /// `n x cols(A)`.
    pub h: Matrix<T>,
    /// `||A - WH||_F` at initialization and after each iteration.
    pub objective_trace: Vec<T>,
}

impl<T: Scalar> NmfResult<T> {
    pub fn error(&self) -> T {
        *self.objective_trace.last().expect("trace holds the initial error")
    }
}

/// Lee-Seung multiplicative updates for the Frobenius objective, from a seeded
/// uniform `(0, 1]` start. Stops after `max_iter` iterations or once the
/// relative improvement falls below `1e-4`.
pub fn nmf<T: Scalar>(a: &Matrix<T>, n: usize, max_iter: usize, seed: u64) -> Result<NmfResult<T>, NumericsError> {
    nmf_observed(a, n, max_iter, seed, |_, _, _| {})
}

/// As [`nmf`], calling `observe(iteration, W, H)` on the initial factors
/// (iteration 0) and after every update.
pub fn nmf_observed<T: Scalar>(
    a: &Matrix<T>,
    n: usize,
    max_iter: usize,
    seed: u64,
    mut observe: impl FnMut(usize, &Matrix<T>, &Matrix<T>),
) -> Result<NmfResult<T>, NumericsError> {
    let (rows, cols) = a.shape();
    if n == 0 {
        return Err(NumericsError::ZeroParameter("n"));
    }
    if n > rows.min(cols) {
        return Err(NumericsError::TooManyFactors { n, max: rows.min(cols) });
    }
    if let Some(k) = a.as_slice().iter().position(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(NumericsError::Negative { row: k / cols, col: k % cols, value: a.as_slice()[k].as_f64() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // random::<f64>() is in [0, 1); 1 - u lies in (0, 1].
    let mut unit = || T::of(1.0 - rng.random::<f64>());
    let mut w = Matrix::from_fn(rows, n, |_, _| unit());
    let mut h = Matrix::from_fn(n, cols, |_, _| unit());
    observe(0, &w, &h);
    let mut trace = vec![residual(a, &w, &h)];

    let floor = T::min_positive_value();
    for iter in 1..=max_iter {
        // H <- H * (W^T A) / (W^T W H)
        let wt = w.transpose();
        let num = wt.matmul(a);
        let den = wt.matmul(&w).matmul(&h);
        for ((x, &nu), &de) in h.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
            *x = *x * nu / de.max(floor);
        }
        // W <- W * (A H^T) / (W H H^T)
        let ht = h.transpose();
        let num = a.matmul(&ht);
        let den = w.matmul(&h.matmul(&ht));
        for ((x, &nu), &de) in w.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
            *x = *x * nu / de.max(floor);
        }
        observe(iter, &w, &h);
        let err = residual(a, &w, &h);
        let prev = *trace.last().expect("non-empty");
        trace.push(err);
        if err == T::zero() || (prev - err).as_f64() < DEFAULT_TOL * prev.as_f64() {
            break;
        }
    }
    Ok(NmfResult { w, h, objective_trace: trace })
}

fn residual<T: Scalar>(a: &Matrix<T>, w: &Matrix<T>, h: &Matrix<T>) -> T {
    let wh = w.matmul(h);
    a.as_slice()
        .iter()
        .zip(wh.as_slice())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}
