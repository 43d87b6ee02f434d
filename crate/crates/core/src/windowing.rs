//! Strided windows over a series and the per-window matrices fed to the solver.

use nalgebra::{DMatrix, DMatrixView};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MultivariateSeries;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-8;

/// `B` windows of `M` consecutive rows, the `b`-th one starting at `b * s`.
///
/// Windows borrow the series; no sample is copied.
#[derive(Debug, Clone)]
pub struct WindowBatch<'a> {
    series: &'a MultivariateSeries,
    starts: Vec<usize>,
    window: usize,
    stride: usize,
}

impl<'a> WindowBatch<'a> {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn dim(&self) -> usize {
        self.series.dim()
    }

    /// The `M x D` block of window `b`.
    pub fn window(&self, b: usize) -> DMatrixView<'a, f64> {
        self.series.values.rows(self.starts[b], self.window)
    }
}

/// Number of full windows: `floor((N - M) / s) + 1`.
pub fn window_count(n: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || window > n {
        return Err(Error::Geometry(format!(
            "window length {window} must be in [1, {n}]"
        )));
    }
    if stride == 0 {
        return Err(Error::Geometry("stride must be at least 1".into()));
    }
    Ok((n - window) / stride + 1)
}

/// Slices `series` into windows of `window` rows at stride `stride`.
/// Trailing rows that do not fill a whole window are dropped.
pub fn make_windows(
    series: &MultivariateSeries,
    window: usize,
    stride: usize,
) -> Result<WindowBatch<'_>> {
    let count = window_count(series.len(), window, stride)?;
    Ok(WindowBatch {
        series,
        starts: (0..count).map(|b| b * stride).collect(),
        window,
        stride,
    })
}

/// What the solver receives for every window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKind {
    /// Sample correlation of the standardized window.
    #[default]
    Correlation,
    /// Population covariance of the centered window (ablation).
    Raw,
}

impl std::str::FromStr for CovarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(Self::Correlation),
            "raw" => Ok(Self::Raw),
            other => Err(Error::Config(format!("unknown covariance kind '{other}'"))),
        }
    }
}

/// One symmetric `D x D` matrix per window.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationBatch {
    pub matrices: Vec<DMatrix<f64>>,
}

impl CorrelationBatch {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

fn window_matrix(
    x: DMatrixView<'_, f64>,
    variance_floor: f64,
    kind: CovarianceKind,
) -> DMatrix<f64> {
    let m = x.nrows() as f64;
    let d = x.ncols();
    let mut centered = DMatrix::zeros(x.nrows(), d);
    let mut live = vec![true; d];
    for j in 0..d {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / m;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        if var < variance_floor {
            live[j] = false;
            continue;
        }
        let scale = match kind {
            CovarianceKind::Correlation => var.sqrt(),
            CovarianceKind::Raw => 1.0,
        };
        for (dst, v) in centered.column_mut(j).iter_mut().zip(col.iter()) {
            *dst = (v - mean) / scale;
        }
    }

    let mut s = DMatrix::zeros(d, d);
    for p in 0..d {
        if !live[p] {
            s[(p, p)] = 1.0;
            continue;
        }
        for q in p..d {
            if !live[q] {
                continue;
            }
            let mut v = centered.column(p).dot(&centered.column(q)) / m;
            if kind == CovarianceKind::Correlation {
                v = if p == q { 1.0 } else { v.clamp(-1.0, 1.0) };
            }
            s[(p, q)] = v;
            s[(q, p)] = v;
        }
    }
    s
}

/// Sample correlation matrix of every window after per-variable standardization
/// (population standard deviation). A variable whose window variance is below
/// `variance_floor` gets a unit diagonal and zero correlations.
pub fn window_correlation(batch: &WindowBatch<'_>, variance_floor: f64) -> CorrelationBatch {
    window_matrices(batch, variance_floor, CovarianceKind::Correlation)
}

pub fn window_matrices(
    batch: &WindowBatch<'_>,
    variance_floor: f64,
    kind: CovarianceKind,
) -> CorrelationBatch {
    let matrices = (0..batch.len())
        .into_par_iter()
        .map(|b| window_matrix(batch.window(b), variance_floor, kind))
        .collect();
    CorrelationBatch { matrices }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    fn series(n: usize, d: usize, f: impl Fn(usize, usize) -> f64) -> MultivariateSeries {
        MultivariateSeries::from_values(DMatrix::from_fn(n, d, f)).unwrap()
    }

    fn random_series(seed: u64, n: usize, d: usize) -> MultivariateSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        MultivariateSeries::from_values(DMatrix::from_row_slice(n, d, &data)).unwrap()
    }

    #[test]
    fn window_counts() {
        let s = series(1000, 2, |i, j| (i + j) as f64);
        let w = make_windows(&s, 100, 100).unwrap();
        assert_eq!(w.len(), 10);
        assert_eq!(
            w.starts(),
            &(0..10).map(|b| b * 100).collect::<Vec<_>>()[..]
        );
        assert_eq!(make_windows(&s, 1000, 100).unwrap().len(), 1);
        let s = series(999, 2, |i, j| (i + j) as f64);
        let w = make_windows(&s, 100, 100).unwrap();
        assert_eq!(w.len(), 9);
        assert_eq!(*w.starts().last().unwrap(), 800);
    }

    #[test]
    fn window_geometry_errors() {
        let s = series(10, 2, |i, _| i as f64);
        assert!(make_windows(&s, 11, 1).is_err());
        assert!(make_windows(&s, 5, 0).is_err());
        assert!(make_windows(&s, 0, 1).is_err());
    }

    #[test]
    fn perfectly_dependent_variables() {
        let s = series(50, 2, |i, j| ((i * 7 % 11) as f64) * (j as f64 + 1.0));
        let c = window_correlation(&make_windows(&s, 50, 1).unwrap(), DEFAULT_VARIANCE_FLOOR);
        assert!((c.matrices[0][(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_draws_are_nearly_uncorrelated() {
        let s = random_series(7, 10_000, 2);
        let c = window_correlation(
            &make_windows(&s, 10_000, 1).unwrap(),
            DEFAULT_VARIANCE_FLOOR,
        );
        assert!(c.matrices[0][(0, 1)].abs() < 0.05);
    }

    #[test]
    fn constant_column_is_isolated() {
        let mut s = random_series(3, 200, 3);
        s.values.column_mut(1).fill(4.2);
        let c = window_correlation(&make_windows(&s, 100, 50).unwrap(), DEFAULT_VARIANCE_FLOOR);
        for m in &c.matrices {
            assert_eq!(m[(1, 1)], 1.0);
            for k in [0, 2] {
                assert_eq!(m[(1, k)], 0.0);
                assert_eq!(m[(k, 1)], 0.0);
            }
            assert_eq!(m, &m.transpose());
        }
    }

    #[test]
    fn raw_covariance_keeps_scale() {
        let s = series(4, 2, |i, j| if j == 0 { i as f64 } else { 2.0 * i as f64 });
        let c = window_matrices(&make_windows(&s, 4, 1).unwrap(), 1e-8, CovarianceKind::Raw);
        // population variance of 0..4 is 1.25
        assert!((c.matrices[0][(0, 0)] - 1.25).abs() < 1e-12);
        assert!((c.matrices[0][(1, 1)] - 5.0).abs() < 1e-12);
        assert!((c.matrices[0][(0, 1)] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn windows_not_straddling_a_join_are_unchanged() {
        let a = random_series(1, 300, 3);
        let b = random_series(2, 300, 3);
        let joined = MultivariateSeries::from_values({
            let mut v = DMatrix::zeros(600, 3);
            v.rows_mut(0, 300).copy_from(&a.values);
            v.rows_mut(300, 300).copy_from(&b.values);
            v
        })
        .unwrap();
        let cj = window_correlation(&make_windows(&joined, 100, 100).unwrap(), 1e-8);
        let ca = window_correlation(&make_windows(&a, 100, 100).unwrap(), 1e-8);
        let cb = window_correlation(&make_windows(&b, 100, 100).unwrap(), 1e-8);
        let parts: Vec<_> = ca
            .matrices
            .iter()
            .chain(cb.matrices.iter())
            .cloned()
            .collect();
        assert_eq!(cj.matrices, parts);
    }

    proptest! {
        #[test]
        fn correlation_is_affine_invariant_and_psd(
            seed in 0u64..1000,
            scales in prop::collection::vec(0.01f64..100.0, 4),
            shifts in prop::collection::vec(-1e3f64..1e3, 4),
        ) {
            let s = random_series(seed, 60, 4);
            let mut t = s.clone();
            for j in 0..4 {
                t.values.column_mut(j).apply(|v| *v = scales[j] * *v + shifts[j]);
            }
            let cs = window_correlation(&make_windows(&s, 30, 10).unwrap(), 1e-8);
            let ct = window_correlation(&make_windows(&t, 30, 10).unwrap(), 1e-8);
            for (a, b) in cs.matrices.iter().zip(&ct.matrices) {
                prop_assert!((a - b).abs().max() < 1e-9);
                prop_assert!((a - a.transpose()).abs().max() < 1e-12);
                let min_eig = a.clone().symmetric_eigenvalues().min();
                prop_assert!(min_eig >= -1e-8);
                for i in 0..4 {
                    prop_assert_eq!(a[(i, i)], 1.0);
                }
            }
        }
    }
}
