//! Per-loop corpus statistics.
//!
//! Everything here is a pure function of record snapshots. Aggregates that
//! cannot be computed (empty subsets, unlabeled denominators) are `None`,
//! rendered as `NaN` in text tables and `null` in JSON.

pub mod acceptance;
pub mod balance;
pub mod hter;
pub mod imbalance;
pub mod lengths;
pub mod novelty;
pub mod report;
pub mod repetition;
pub mod ter;
pub mod tokenize;
pub mod units;
pub mod vocab;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::TargetLabel;

pub use acceptance::{acceptance_rates, AcceptanceRates};
pub use balance::{distribution_balance, target_coverage, Balance, FrequencyMode};
pub use hter::{hter_aggregate, HterAggregate, HterScope};
pub use imbalance::{imbalance_degree, Distance};
pub use lengths::{length_stats, LengthStats};
pub use novelty::{novelty, novelty_scores};
pub use report::{loop_report, render_table, LoopReport, ReportConfig};
pub use repetition::repetition_rate;
pub use ter::{edit_distance, ter, ter_edits, TerEdits};
pub use tokenize::{tokenize, TokenSequence};
pub use units::UnitSelector;
pub use vocab::{vocabulary_expansion, VocabularyExpansion};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("reference must contain at least one token")]
    EmptyReference,
    #[error("candidate corpus is empty")]
    EmptyCandidates,
    #[error("reference corpus is empty")]
    EmptyReferenceCorpus,
    #[error("need at least 4 tokens, found {0}")]
    TooFewTokens(usize),
    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("class counts sum to zero")]
    ZeroTotal,
    #[error("category set is empty")]
    EmptyCategorySet,
    #[error("version `{0}` is not frozen")]
    NotFrozen(String),
    #[error("version `{0}` has no reviewed records")]
    NoReviewedRecords(String),
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Average and spread of a per-target statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroStat {
    pub avg: Option<f64>,
    pub std: Option<f64>,
}

impl MacroStat {
    pub const UNDEFINED: MacroStat = MacroStat { avg: None, std: None };

    pub fn over(values: &[f64]) -> MacroStat {
        MacroStat {
            avg: mean(values),
            std: sample_std(values),
        }
    }

    /// Over the seven main targets; undefined unless every one has a value.
    pub fn over_main(per_target: &BTreeMap<TargetLabel, Option<f64>>) -> MacroStat {
        let values: Option<Vec<f64>> = TargetLabel::MAIN
            .iter()
            .map(|t| per_target.get(t).copied().flatten())
            .collect();
        values.map_or(MacroStat::UNDEFINED, |v| MacroStat::over(&v))
    }
}
