#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Correlation matrix of `dim + 3` Gaussian draws. Few draws give large
/// off-diagonals and now and then a badly conditioned matrix.
pub fn random_correlation(seed: u64, dim: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = dim + 3;
    let x = DMatrix::<f64>::from_fn(samples, dim, |_, _| StandardNormal.sample(&mut rng));
    let cov: DMatrix<f64> = x.transpose() * &x;
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
        }
    })
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

/// Correlation of the residuals of `x_p` and `x_q` after least-squares
/// regression on `x_r` (all columns assumed zero mean).
pub fn residual_correlation(x: &DMatrix<f64>, p: usize, q: usize, r: usize) -> f64 {
    let col = |k: usize| x.column(k).into_owned();
    let residual = |k: usize| {
        let (y, z) = (col(k), col(r));
        let beta = y.dot(&z) / z.dot(&z);
        y - z * beta
    };
    let (a, b) = (residual(p), residual(q));
    a.dot(&b) / (a.norm() * b.norm())
}
