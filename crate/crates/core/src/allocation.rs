//! Turning the second-order trajectory into activity labels.
//!
//! Spikes that survive the threshold mark segment boundaries; every window
//! within the guard radius of a spike is labeled 0 (transition), all others 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardUnits {
    /// The guard spans `Z·M` samples, i.e. `ceil(Z·M / s)` windows.
    #[default]
    Samples,
    /// The guard spans `Z·M` window indices.
    Batches,
}

impl std::str::FromStr for GuardUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "samples" => Ok(Self::Samples),
            "batches" => Ok(Self::Batches),
            other => Err(Error::Config(format!("unknown guard units '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationConfig {
    pub threshold: f64,
    pub guard_z: usize,
    pub guard_units: GuardUnits,
    pub window: usize,
    pub stride: usize,
}

impl AllocationConfig {
    pub fn new(window: usize, stride: usize) -> Self {
        Self {
            threshold: 0.5,
            guard_z: 5,
            guard_units: GuardUnits::Samples,
            window,
            stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::Config(format!(
                "threshold {} must be >= 0",
                self.threshold
            )));
        }
        if self.guard_z == 0 {
            return Err(Error::Config(
                "guard multiplier Z must be at least 1".into(),
            ));
        }
        if self.window == 0 || self.stride == 0 {
            return Err(Error::Config("window and stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Guard radius in window indices.
    pub fn radius(&self) -> usize {
        let span = self.guard_z * self.window;
        match self.guard_units {
            GuardUnits::Samples => span.div_ceil(self.stride),
            GuardUnits::Batches => span,
        }
    }
}

/// Zeroes every entry strictly below `threshold`.
pub fn denoise_threshold(d2g_norm: &[f64], threshold: f64) -> Vec<f64> {
    d2g_norm
        .iter()
        .map(|&v| if v < threshold { 0.0 } else { v })
        .collect()
}

/// Labels start at 1; each positive entry `i` zeroes `[i - r, i + r]`
/// (inclusive, clipped), with `r` from [`AllocationConfig::radius`].
pub fn allocate_segments(d2g_thresh: &[f64], config: &AllocationConfig) -> Vec<u8> {
    let n = d2g_thresh.len();
    let mut labels = vec![1u8; n];
    let r = config.radius();
    // Spikes are visited in order, so bands only ever extend to the right.
    let mut covered_until = 0usize;
    for (i, _) in d2g_thresh.iter().enumerate().filter(|(_, v)| **v > 0.0) {
        let start = i.saturating_sub(r).max(covered_until);
        let end = i.saturating_add(r).min(n - 1);
        if start <= end {
            labels[start..=end].fill(0);
            covered_until = end + 1;
        }
    }
    labels
}

/// Spreads per-window labels onto samples: each sample takes the label of the
/// window whose midpoint `start + (M - 1) / 2` is closest, ties going to the
/// earlier window.
pub fn batch_labels_to_samples(
    batch_labels: &[u8],
    starts: &[usize],
    window: usize,
    n: usize,
) -> Result<Vec<u8>> {
    if batch_labels.len() != starts.len() {
        return Err(Error::LengthMismatch {
            left: batch_labels.len(),
            right: starts.len(),
        });
    }
    if batch_labels.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if window == 0 {
        return Err(Error::Geometry("window length must be at least 1".into()));
    }
    // Doubled coordinates keep half-sample midpoints integral.
    let mid2: Vec<i64> = starts
        .iter()
        .map(|&s| 2 * s as i64 + window as i64 - 1)
        .collect();
    let mut b = 0usize;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let t2 = 2 * t as i64;
        while b + 1 < mid2.len() && (t2 - mid2[b + 1]).abs() < (t2 - mid2[b]).abs() {
            b += 1;
        }
        out.push(batch_labels[b]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentLabels {
    pub batch_labels: Vec<u8>,
    pub sample_labels: Vec<u8>,
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn config_with_radius(r: usize) -> AllocationConfig {
        AllocationConfig {
            guard_z: r,
            guard_units: GuardUnits::Batches,
            ..AllocationConfig::new(1, 1)
        }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(denoise_threshold(&[0.4, 0.6], 0.5), vec![0.0, 0.6]);
        assert_eq!(
            denoise_threshold(&[0.4, 0.6, 0.0], 0.0),
            vec![0.4, 0.6, 0.0]
        );
        assert_eq!(denoise_threshold(&[0.1, 0.2], 0.5), vec![0.0, 0.0]);
        assert_eq!(denoise_threshold(&[0.5], 0.5), vec![0.5]);
    }

    #[test]
    fn radius_units() {
        let mut c = AllocationConfig::new(500, 100);
        assert_eq!(c.radius(), 25);
        c.window = 1000;
        c.stride = 300;
        assert_eq!(c.radius(), 17);
        c.guard_units = GuardUnits::Batches;
        assert_eq!(c.radius(), 5000);
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(
            allocate_segments(&[0.0; 10], &config_with_radius(2)),
            vec![1; 10]
        );
        let mut d = vec![0.0; 10];
        d[5] = 0.9;
        assert_eq!(
            allocate_segments(&d, &config_with_radius(2)),
            vec![1, 1, 1, 0, 0, 0, 0, 0, 1, 1]
        );
        let mut d = vec![0.0; 12];
        d[3] = 1.0;
        d[5] = 0.7;
        assert_eq!(
            allocate_segments(&d, &config_with_radius(1)),
            vec![1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        );
    }

    #[test]
    fn sample_mapping_examples() {
        assert_eq!(
            batch_labels_to_samples(&[0], &[0], 10, 30).unwrap(),
            vec![0; 30]
        );
        assert_eq!(
            batch_labels_to_samples(&[1, 1, 1], &[0, 10, 20], 10, 30).unwrap(),
            vec![1; 30]
        );
        let out = batch_labels_to_samples(&[1, 0], &[0, 100], 100, 200).unwrap();
        assert!(out[..100].iter().all(|&l| l == 1));
        assert!(out[100..].iter().all(|&l| l == 0));
        assert!(batch_labels_to_samples(&[1, 0], &[0], 100, 200).is_err());
    }

    #[test]
    fn sample_mapping_tie_goes_to_earlier_window() {
        // M = 3, starts 0 and 2: midpoints 1 and 3, sample 2 is equidistant.
        let out = batch_labels_to_samples(&[1, 0], &[0, 2], 3, 5).unwrap();
        assert_eq!(out, vec![1, 1, 1, 0, 0]);
    }

    fn spikes() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop::sample::select(vec![0.0, 0.0, 0.0, 0.6, 1.0]), 1..80)
    }

    proptest! {
        #[test]
        fn adding_a_spike_only_removes_ones(d in spikes(), extra in 0usize..80, r in 0usize..6) {
            let config = config_with_radius(r.max(1));
            let before = allocate_segments(&d, &config);
            let mut more = d.clone();
            let idx = extra % more.len();
            more[idx] = 1.0;
            let after = allocate_segments(&more, &config);
            for (a, b) in before.iter().zip(&after) {
                prop_assert!(*b <= *a);
            }
        }

        #[test]
        fn spikes_inside_zero_bands_are_redundant(d in spikes(), r in 1usize..6) {
            let config = config_with_radius(r);
            let labels = allocate_segments(&d, &config);
            // Drop every spike whose own band is already covered by the others.
            let mut pruned = d.clone();
            for i in 0..d.len() {
                if d[i] > 0.0 {
                    let mut without = pruned.clone();
                    without[i] = 0.0;
                    if allocate_segments(&without, &config) == labels {
                        pruned = without;
                    }
                }
            }
            prop_assert_eq!(allocate_segments(&pruned, &config), labels);
        }

        #[test]
        fn huge_radius_zeroes_everything(d in spikes()) {
            let config = config_with_radius(d.len());
            let labels = allocate_segments(&d, &config);
            if d.iter().any(|v| *v > 0.0) {
                prop_assert!(labels.iter().all(|l| *l == 0));
            } else {
                prop_assert!(labels.iter().all(|l| *l == 1));
            }
        }
    }
}
