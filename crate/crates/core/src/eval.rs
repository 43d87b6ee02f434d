use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Agreement between predicted and true per-window labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub accuracy: f64,
    pub total: usize,
    pub matching: usize,
}

pub fn score(pred: &[u8], truth: &[u8]) -> Result<Score> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let matching = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(Score {
        accuracy: matching as f64 / pred.len() as f64,
        total: pred.len(),
        matching,
    })
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    score(pred, truth).map(|s| s.accuracy)
}
