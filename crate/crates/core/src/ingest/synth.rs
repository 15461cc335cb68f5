use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("cannot synthesize activations for an empty token list")]
    NoTokens,
    #[error("d_act must be positive")]
    ZeroDim,
}

/// Fraction of neurons a token drives strongly.
const ACTIVE_FRACTION: f64 = 0.25;

/// Stable 64-bit hash of `(seed, token)`.
pub fn token_seed(token: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(token.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

/// One sparse non-negative activation column for `token`.
pub fn token_column(token: &str, d_act: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(token_seed(token, seed));
    (0..d_act)
        .map(|_| {
            if rng.random_bool(ACTIVE_FRACTION) {
                rng.random_range(0.5f32..1.5)
            } else {
                rng.random_range(0.0f32..0.05)
            }
        })
        .collect()
}

/// Deterministic stand-in for a language model's token activations: a
/// `d_act x tokens.len()` matrix whose column `j` depends only on
/// `(tokens[j], seed)`.
pub fn synth_activations(tokens: &[String], d_act: usize, seed: u64) -> Result<Matrix<f32>, SynthError> {
    if tokens.is_empty() {
        return Err(SynthError::NoTokens);
    }
    if d_act == 0 {
        return Err(SynthError::ZeroDim);
    }
    let columns: Vec<Vec<f32>> = tokens.iter().map(|t| token_column(t, d_act, seed)).collect();
    Ok(Matrix::from_fn(d_act, tokens.len(), |i, j| columns[j][i]))
}
