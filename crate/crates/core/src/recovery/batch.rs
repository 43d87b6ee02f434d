use nalgebra::DMatrix;
use rayon::prelude::*;

use super::admm::{glasso_solve, GlassoSolution};
use super::select::select_with_solutions;
use super::{LambdaMode, SolverSettings};
use crate::error::{Error, Result};
use crate::windowing::CorrelationBatch;

/// Precision matrices for every window, in window order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionBatch {
    pub matrices: Vec<DMatrix<f64>>,
    /// One penalty per chunk.
    pub lambda_used: Vec<f64>,
    pub chunk_size: usize,
    pub iterations_used: Vec<usize>,
    pub converged: Vec<bool>,
}

impl PrecisionBatch {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Penalty that was applied to window `b`.
    pub fn lambda_for_window(&self, b: usize) -> f64 {
        self.lambda_used[b / self.chunk_size]
    }

    pub fn unconverged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }
}

/// Solves every window in chunks of `settings.chunk_size`.
///
/// `samples` is the window length `M`, used by penalty selection. With a fixed
/// penalty the chunking only groups windows and does not change any result.
pub fn glasso_batch(
    correlations: &CorrelationBatch,
    samples: usize,
    settings: &SolverSettings,
) -> Result<PrecisionBatch> {
    settings.validate()?;
    let chunk_size = settings.chunk_size;

    let per_chunk: Vec<(f64, Vec<GlassoSolution>)> = correlations
        .matrices
        .par_chunks(chunk_size)
        .enumerate()
        .map(|(c, chunk)| {
            let offset = c * chunk_size;
            match settings.lambda_mode {
                LambdaMode::Fixed(lambda) => {
                    let sols = chunk
                        .par_iter()
                        .enumerate()
                        .map(|(i, s)| {
                            glasso_solve(s, lambda, settings).map_err(|e| Error::Window {
                                index: offset + i,
                                source: Box::new(e),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((lambda, sols))
                }
                LambdaMode::Auto => {
                    select_with_solutions(chunk, samples, &settings.lambda_grid, settings, offset)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = PrecisionBatch {
        matrices: Vec::with_capacity(correlations.len()),
        lambda_used: Vec::with_capacity(per_chunk.len()),
        chunk_size,
        iterations_used: Vec::with_capacity(correlations.len()),
        converged: Vec::with_capacity(correlations.len()),
    };
    for (lambda, sols) in per_chunk {
        out.lambda_used.push(lambda);
        for sol in sols {
            out.iterations_used.push(sol.iterations);
            out.converged.push(sol.converged);
            out.matrices.push(sol.precision);
        }
    }
    if out.unconverged() > 0 {
        log::warn!(
            "{} of {} windows hit the iteration cap",
            out.unconverged(),
            out.len()
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(r: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[1.0, r, 0.0, r, 1.0, r / 2.0, 0.0, r / 2.0, 1.0])
    }

    fn batch(n: usize) -> CorrelationBatch {
        CorrelationBatch {
            matrices: (0..n)
                .map(|i| corr(0.05 + 0.6 * i as f64 / n as f64))
                .collect(),
        }
    }

    fn fixed(lambda: f64, chunk_size: usize) -> SolverSettings {
        SolverSettings {
            lambda_mode: LambdaMode::Fixed(lambda),
            chunk_size,
            ..Default::default()
        }
    }

    #[test]
    fn single_window_matches_direct_solve() {
        let b = CorrelationBatch {
            matrices: vec![corr(0.4)],
        };
        let settings = fixed(0.1, 64);
        let out = glasso_batch(&b, 100, &settings).unwrap();
        let direct = glasso_solve(&corr(0.4), 0.1, &settings).unwrap();
        assert_eq!(out.matrices[0], direct.precision);
        assert_eq!(out.lambda_used, vec![0.1]);
    }

    #[test]
    fn permutation_commutes_with_solving() {
        let b = batch(12);
        let settings = fixed(0.05, 5);
        let out = glasso_batch(&b, 100, &settings).unwrap();
        let perm: Vec<usize> = (0..12).map(|i| (i * 5) % 12).collect();
        let permuted = CorrelationBatch {
            matrices: perm.iter().map(|&i| b.matrices[i].clone()).collect(),
        };
        let out_p = glasso_batch(&permuted, 100, &settings).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(out_p.matrices[k], out.matrices[i]);
        }
    }

    #[test]
    fn chunk_size_is_irrelevant_for_fixed_lambda() {
        let b = batch(100);
        let a = glasso_batch(&b, 100, &fixed(0.1, 16)).unwrap();
        let c = glasso_batch(&b, 100, &fixed(0.1, 64)).unwrap();
        assert_eq!(a.matrices, c.matrices);
        assert_eq!(a.lambda_used.len(), 7);
        assert_eq!(c.lambda_used.len(), 2);
    }

    #[test]
    fn auto_mode_shares_lambda_within_chunk() {
        let b = batch(10);
        let settings = SolverSettings {
            chunk_size: 4,
            ..Default::default()
        };
        let out = glasso_batch(&b, 200, &settings).unwrap();
        assert_eq!(out.lambda_used.len(), 3);
        for w in 0..10 {
            let lambda = out.lambda_for_window(w);
            let direct = glasso_solve(&b.matrices[w], lambda, &settings).unwrap();
            assert_eq!(out.matrices[w], direct.precision);
        }
    }

    #[test]
    fn window_errors_carry_index() {
        let mut b = batch(6);
        b.matrices[4][(0, 1)] = 0.9;
        let err = glasso_batch(&b, 100, &fixed(0.1, 4)).unwrap_err();
        assert!(matches!(err, Error::Window { index: 4, .. }), "{err:?}");
    }
}
