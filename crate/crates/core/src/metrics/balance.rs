//! RMSE/MSE of a target distribution against the uniform one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::label::TargetLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FrequencyMode {
    /// Absolute pair counts.
    Abs,
    /// Percentages of the category total.
    Perc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub rmse: f64,
    /// Always `rmse * rmse`.
    pub mse: f64,
}

pub fn distribution_balance(
    counts: &BTreeMap<TargetLabel, u64>,
    mode: FrequencyMode,
    categories: &[TargetLabel],
) -> Result<Balance, MetricError> {
    if categories.is_empty() {
        return Err(MetricError::EmptyCategorySet);
    }
    if categories.len() < 2 {
        return Err(MetricError::TooFewClasses(categories.len()));
    }
    let values: Vec<f64> = categories
        .iter()
        .map(|c| counts.get(c).copied().unwrap_or(0) as f64)
        .collect();
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Err(MetricError::ZeroTotal);
    }
    let k = values.len() as f64;
    let (values, expected): (Vec<f64>, f64) = match mode {
        FrequencyMode::Abs => (values, total / k),
        FrequencyMode::Perc => (values.iter().map(|v| 100.0 * v / total).collect(), 100.0 / k),
    };
    let mean_sq = values.iter().map(|v| (v - expected) * (v - expected)).sum::<f64>() / k;
    let rmse = mean_sq.sqrt();
    Ok(Balance { rmse, mse: rmse * rmse })
}

/// Share of each label in percent over all labels present in `counts`.
pub fn target_coverage(counts: &BTreeMap<TargetLabel, u64>) -> BTreeMap<TargetLabel, f64> {
    let total: u64 = counts.values().sum();
    counts
        .iter()
        .map(|(&l, &c)| {
            let pct = if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
            (l, pct)
        })
        .collect()
}
