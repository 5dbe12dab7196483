//! Imbalance degree of a multi-class distribution.

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Distance between class distributions. Only Euclidean is implemented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Distance {
    #[default]
    Euclidean,
}

/// Imbalance degree of per-class `counts`.
///
/// With `m` minority classes (share below `1/K`) this is
/// `d(p, e) / d(iota_m, e) + (m - 1)`, where `iota_m` is the distribution with
/// `m` minority classes furthest from uniform; 0 when no class is a minority.
pub fn imbalance_degree(counts: &[u64], distance: Distance) -> Result<f64, MetricError> {
    let k = counts.len();
    if k < 2 {
        return Err(MetricError::TooFewClasses(k));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MetricError::ZeroTotal);
    }
    let k64 = k as u64;
    let minority = counts.iter().filter(|&&c| c * k64 < total).count();
    if minority == 0 {
        return Ok(0.0);
    }
    match distance {
        Distance::Euclidean => {
            // Scaled by K so the uniform share is exactly 1: the ratio to the
            // extreme distance sqrt(m(m+1))/K becomes sqrt(sum / (m(m+1))).
            let spread: f64 = counts
                .iter()
                .map(|&c| {
                    let scaled = (c * k64) as f64 / total as f64;
                    (scaled - 1.0) * (scaled - 1.0)
                })
                .sum();
            let m = minority as f64;
            Ok((spread / (m * (m + 1.0))).sqrt() + (m - 1.0))
        }
    }
}
