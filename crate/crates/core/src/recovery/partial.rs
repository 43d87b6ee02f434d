use nalgebra::DMatrix;

use super::batch::PrecisionBatch;
use crate::error::{Error, Result};

/// Partial-correlation adjacency matrices, one per window, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CIGraphSequence {
    pub graphs: Vec<DMatrix<f64>>,
}

impl CIGraphSequence {
    pub fn from_precisions(batch: &PrecisionBatch) -> Result<Self> {
        let graphs = batch
            .matrices
            .iter()
            .enumerate()
            .map(|(index, theta)| {
                partial_correlation_graph(theta).map_err(|e| Error::Window {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { graphs })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// `ρ_pq = -Θ_pq / sqrt(Θ_pp Θ_qq)` off the diagonal, zero on it.
pub fn partial_correlation_graph(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !theta.is_square() {
        return Err(Error::NotSymmetric(format!(
            "{}x{} is not square",
            theta.nrows(),
            theta.ncols()
        )));
    }
    let diag = theta.diagonal();
    if diag.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let d = theta.nrows();
    let mut g = DMatrix::zeros(d, d);
    for p in 0..d {
        for q in (p + 1)..d {
            let v = (-theta[(p, q)] / (diag[p] * diag[q]).sqrt()).clamp(-1.0, 1.0);
            g[(p, q)] = v;
            g[(q, p)] = v;
        }
    }
    Ok(g)
}
