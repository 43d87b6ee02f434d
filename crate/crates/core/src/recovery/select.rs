//! Chunk-level penalty selection by extended BIC.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::admm::{glasso_solve, refit_on_support, GlassoSolution, EDGE_THRESHOLD};
use super::SolverSettings;
use crate::error::{Error, Result};

pub const EBIC_GAMMA: f64 = 0.5;

/// Extended BIC of `theta` fitted to `s` from `samples` observations:
/// `-2·M·ℓ + k·ln M + 4γ·k·ln D`, where `ℓ = ½(logdet Θ - tr(SΘ))` is the
/// per-sample Gaussian log-likelihood without constants and `k` counts
/// upper-triangle edges.
pub fn ebic(theta: &DMatrix<f64>, s: &DMatrix<f64>, samples: usize) -> Result<f64> {
    ebic_with_edges(theta, s, samples, edge_count(theta))
}

/// Extended BIC of the graph that `theta` encodes: the likelihood is taken at
/// the unpenalized refit on that graph, so shrinkage of the kept edges does
/// not count against it.
pub fn graph_ebic(
    theta: &DMatrix<f64>,
    s: &DMatrix<f64>,
    samples: usize,
    settings: &SolverSettings,
) -> Result<f64> {
    let refit = refit_on_support(s, theta, settings)?;
    ebic_with_edges(&refit.precision, s, samples, edge_count(theta))
}

fn edge_count(theta: &DMatrix<f64>) -> usize {
    let d = theta.nrows();
    let mut edges = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            if theta[(i, j)].abs() > EDGE_THRESHOLD {
                edges += 1;
            }
        }
    }
    edges
}

fn ebic_with_edges(
    theta: &DMatrix<f64>,
    s: &DMatrix<f64>,
    samples: usize,
    edges: usize,
) -> Result<f64> {
    let d = theta.nrows();
    let chol = theta.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let loglik = 0.5 * (log_det - (s * theta).trace());
    let m = samples as f64;
    let k = edges as f64;
    Ok(-2.0 * m * loglik + k * m.ln() + 4.0 * EBIC_GAMMA * k * (d as f64).ln())
}

/// Picks the grid penalty whose graphs have the lowest chunk-averaged
/// extended BIC (see [`graph_ebic`]).
/// Ties go to the larger penalty.
pub fn select_lambda(
    chunk: &[DMatrix<f64>],
    samples: usize,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<f64> {
    select_with_solutions(chunk, samples, grid, settings, 0).map(|(lambda, _)| lambda)
}

/// Like [`select_lambda`], also returning the chunk's solutions at the chosen
/// penalty. `offset` is the global index of the chunk's first window, used to
/// tag errors.
pub(crate) fn select_with_solutions(
    chunk: &[DMatrix<f64>],
    samples: usize,
    grid: &[f64],
    settings: &SolverSettings,
    offset: usize,
) -> Result<(f64, Vec<GlassoSolution>)> {
    if chunk.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }

    // Descending so that strict improvement keeps the larger penalty on ties.
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    order.dedup();

    let per_lambda: Vec<(f64, f64, Vec<GlassoSolution>)> = order
        .par_iter()
        .map(|&lambda| {
            let solutions = chunk
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    glasso_solve(s, lambda, settings).map_err(|e| Error::Window {
                        index: offset + i,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = 0.0;
            for (i, (sol, s)) in solutions.iter().zip(chunk).enumerate() {
                total += graph_ebic(&sol.precision, s, samples, settings).map_err(|e| {
                    Error::Window {
                        index: offset + i,
                        source: Box::new(e),
                    }
                })?;
            }
            Ok((lambda, total / chunk.len() as f64, solutions))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (idx, (_, score, _)) in per_lambda.iter().enumerate().skip(1) {
        let incumbent = per_lambda[best].1;
        let tol = 1e-9 * incumbent.abs().max(1.0);
        if *score < incumbent - tol {
            best = idx;
        }
    }
    let (lambda, _, solutions) = per_lambda.into_iter().nth(best).expect("grid is nonempty");
    Ok((lambda, solutions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ties_break_toward_sparser() {
        let chunk = vec![DMatrix::<f64>::identity(3, 3); 4];
        let lambda = select_lambda(&chunk, 100, &[0.05, 0.5], &SolverSettings::default()).unwrap();
        assert_eq!(lambda, 0.5);
    }

    #[test]
    fn single_grid_entry_is_returned() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let lambda = select_lambda(&[s], 100, &[0.123], &SolverSettings::default()).unwrap();
        assert_eq!(lambda, 0.123);
    }

    #[test]
    fn strong_correlation_keeps_its_edge() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let lambda = select_lambda(
            &[s],
            500,
            &[0.01, 0.05, 0.1, 0.2, 0.5, 0.7],
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(lambda < 0.6);
    }

    #[test]
    fn ebic_counts_edges() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(ebic(&id, &id, 100).unwrap(), 300.0);
        let mut theta = id.clone();
        theta[(0, 1)] = 0.1;
        theta[(1, 0)] = 0.1;
        let with_edge = ebic(&theta, &id, 100).unwrap();
        let log_det = theta.clone().determinant().ln();
        let expected = -100.0 * (log_det - 3.0) + 100f64.ln() + 2.0 * 3f64.ln();
        assert!((with_edge - expected).abs() < 1e-9);
    }

    #[test]
    fn empty_chunk_is_rejected() {
        assert!(select_lambda(&[], 100, &[0.1], &SolverSettings::default()).is_err());
    }

    #[test]
    fn graph_ebic_ignores_shrinkage() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let settings = SolverSettings::default();
        let mild = glasso_solve(&s, 0.05, &settings).unwrap().precision;
        let strong = glasso_solve(&s, 0.3, &settings).unwrap().precision;
        let a = graph_ebic(&mild, &s, 200, &settings).unwrap();
        let b = graph_ebic(&strong, &s, 200, &settings).unwrap();
        assert!((a - b).abs() < 1e-6);
        assert!(ebic(&strong, &s, 200).unwrap() > b);
    }
}
