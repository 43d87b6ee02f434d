//! Piecewise-stationary Gaussian series with known precision matrices.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with `seed_from_u64`.
//! Stream 0 of the seed drives the samples; stream `k + 1` drives the
//! precision matrix of segment `k`. Normal draws use `rand_distr::StandardNormal`.
//! Both are specified independently of the host, so fixtures reproduce across
//! platforms for a fixed crate version.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LabelSeries, MultivariateSeries};

/// Magnitude interval for off-diagonal weights; signs are drawn separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRange {
    pub min: f64,
    pub max: f64,
}

impl WeightRange {
    fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::Config(format!(
                "weight range [{}, {}] must satisfy 0 < min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub length: usize,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub dim: usize,
    pub segments: Vec<SegmentSpec>,
    pub weight_range: WeightRange,
    /// Half-width, in samples, of the zero-label band around each internal boundary.
    pub truth_guard: usize,
}

impl SyntheticSpec {
    /// `count` segments of `length` samples sharing one density.
    pub fn uniform(
        seed: u64,
        dim: usize,
        count: usize,
        length: usize,
        density: f64,
        weight_range: WeightRange,
        truth_guard: usize,
    ) -> Self {
        Self {
            seed,
            dim,
            segments: vec![SegmentSpec { length, density }; count],
            weight_range,
            truth_guard,
        }
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::TooFewVariables(self.dim));
        }
        if self.segments.is_empty() {
            return Err(Error::Config("at least one segment is required".into()));
        }
        for seg in &self.segments {
            if seg.length == 0 {
                return Err(Error::Config("segment length must be positive".into()));
            }
            if !(seg.density > 0.0 && seg.density < 1.0) {
                return Err(Error::Config(format!(
                    "density {} not in (0, 1)",
                    seg.density
                )));
            }
        }
        self.weight_range.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub series: MultivariateSeries,
    pub truth: LabelSeries,
    pub precisions: Vec<DMatrix<f64>>,
    /// Sample index where each segment after the first begins.
    pub boundaries: Vec<usize>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sparse_precision_from(
    rng: &mut ChaCha8Rng,
    dim: usize,
    density: f64,
    weights: WeightRange,
) -> DMatrix<f64> {
    let mut theta = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            if rng.random::<f64>() < density {
                let magnitude = weights.min + (weights.max - weights.min) * rng.random::<f64>();
                let w = if rng.random_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                };
                theta[(i, j)] = w;
                theta[(j, i)] = w;
            }
        }
    }
    for i in 0..dim {
        let row_sum: f64 = theta.row(i).iter().map(|v| v.abs()).sum();
        theta[(i, i)] = row_sum + 1.0;
    }
    theta
}

/// Symmetric, strictly diagonally dominant (hence positive definite) matrix
/// whose upper-triangle entries are nonzero with probability `density`.
pub fn random_sparse_precision(
    seed: u64,
    dim: usize,
    density: f64,
    weights: WeightRange,
) -> Result<DMatrix<f64>> {
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::Config(format!("density {density} not in (0, 1)")));
    }
    weights.validate()?;
    Ok(sparse_precision_from(
        &mut stream_rng(seed, 0),
        dim,
        density,
        weights,
    ))
}

/// Concatenates i.i.d. zero-mean Gaussian blocks, block `k` having precision
/// `segments[k].1` and `segments[k].0` rows. Truth is 1 except within
/// `truth_guard` samples of an internal boundary.
pub fn generate_from_precisions(
    seed: u64,
    segments: &[(usize, DMatrix<f64>)],
    truth_guard: usize,
) -> Result<SyntheticData> {
    let dim = segments
        .first()
        .map(|(_, p)| p.nrows())
        .ok_or_else(|| Error::Config("at least one segment is required".into()))?;
    let n: usize = segments.iter().map(|(len, _)| len).sum();
    let mut rng = stream_rng(seed, 0);
    let mut values = DMatrix::zeros(n, dim);
    let mut boundaries = Vec::new();
    let mut row = 0;
    for (k, (len, theta)) in segments.iter().enumerate() {
        if theta.shape() != (dim, dim) {
            return Err(Error::LengthMismatch {
                left: theta.nrows(),
                right: dim,
            });
        }
        let cov = theta
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        let factor = cov.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
        if k > 0 {
            boundaries.push(row);
        }
        for _ in 0..*len {
            let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let x = &factor * z;
            values.row_mut(row).copy_from(&x.transpose());
            row += 1;
        }
    }

    let mut labels = vec![1u8; n];
    for &b in &boundaries {
        let lo = b.saturating_sub(truth_guard);
        let hi = (b + truth_guard).min(n);
        labels[lo..hi].fill(0);
    }

    Ok(SyntheticData {
        series: MultivariateSeries::from_values(values)?,
        truth: LabelSeries::new(labels)?,
        precisions: segments.iter().map(|(_, p)| p.clone()).collect(),
        boundaries,
    })
}

/// Draws one random sparse precision per segment, then samples the series.
pub fn generate_piecewise_gaussian(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let segments: Vec<(usize, DMatrix<f64>)> = spec
        .segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            let mut rng = stream_rng(spec.seed, k as u64 + 1);
            let theta = sparse_precision_from(&mut rng, spec.dim, seg.density, spec.weight_range);
            (seg.length, theta)
        })
        .collect();
    generate_from_precisions(spec.seed, &segments, spec.truth_guard)
}
