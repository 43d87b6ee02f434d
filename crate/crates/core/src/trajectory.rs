//! Distances between consecutive graphs and the second-order sequence that
//! sharpens them into boundary spikes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::CIGraphSequence;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// `Σ_{p,q} (A - B)_pq`; signed, so opposite changes can cancel.
    #[default]
    SignedSum,
    L1,
    /// Euclidean norm of the entrywise difference.
    L2,
    Frobenius,
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed-sum" => Ok(Self::SignedSum),
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            "frobenius" => Ok(Self::Frobenius),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SignedSum => "signed-sum",
            Self::L1 => "l1",
            Self::L2 => "l2",
            Self::Frobenius => "frobenius",
        })
    }
}

pub fn graph_distance(a: &DMatrix<f64>, b: &DMatrix<f64>, metric: DistanceMetric) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let diff = a.iter().zip(b.iter()).map(|(x, y)| x - y);
    Ok(match metric {
        DistanceMetric::SignedSum => diff.sum(),
        DistanceMetric::L1 => diff.map(f64::abs).sum(),
        // Same quantity for matrices viewed entrywise.
        DistanceMetric::L2 | DistanceMetric::Frobenius => diff.map(|v| v * v).sum::<f64>().sqrt(),
    })
}

/// `dG[b] = distance(G_b, G_{b+1})`, length `B - 1`.
pub fn first_order_sequence(graphs: &CIGraphSequence, metric: DistanceMetric) -> Result<Vec<f64>> {
    if graphs.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: graphs.len(),
        });
    }
    graphs
        .graphs
        .windows(2)
        .map(|pair| graph_distance(&pair[0], &pair[1], metric))
        .collect()
}

/// `|dG[b] - dG[b-1]|` for `b = 1..B-2`, padded with a zero on each side so
/// index `b` lines up with window `b`. Output length is `dG.len() + 1`.
pub fn second_order_sequence(dg: &[f64]) -> Result<Vec<f64>> {
    if dg.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: dg.len(),
        });
    }
    let mut out = Vec::with_capacity(dg.len() + 1);
    out.push(0.0);
    out.extend(dg.windows(2).map(|w| (w[1] - w[0]).abs()));
    out.push(0.0);
    Ok(out)
}

/// Divides by the maximum; an all-zero input comes back unchanged.
pub fn normalize_signal(d2g: &[f64]) -> Vec<f64> {
    let max = d2g.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        d2g.iter().map(|v| v / max).collect()
    } else {
        d2g.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySignal {
    pub dg: Vec<f64>,
    pub d2g: Vec<f64>,
    pub d2g_norm: Vec<f64>,
    pub metric: DistanceMetric,
}

impl TrajectorySignal {
    pub fn compute(graphs: &CIGraphSequence, metric: DistanceMetric) -> Result<Self> {
        let dg = first_order_sequence(graphs, metric)?;
        let d2g = second_order_sequence(&dg)?;
        let d2g_norm = normalize_signal(&d2g);
        Ok(Self {
            dg,
            d2g,
            d2g_norm,
            metric,
        })
    }
}
