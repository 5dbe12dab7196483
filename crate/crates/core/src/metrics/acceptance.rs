//! Reviewer verdict shares.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MacroStat, MetricError};
use crate::label::TargetLabel;
use crate::record::{ReviewStatus, VersionSnapshot};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetAcceptance {
    pub reviewed: usize,
    pub untouched_pct: Option<f64>,
    pub modified_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    /// Records settled by a reviewer; system sweeps are not counted.
    pub reviewed: usize,
    pub untouched_pct: f64,
    pub modified_pct: f64,
    pub discarded_pct: f64,
    /// Empty when some reviewer discard has no target, since per-target
    /// denominators are then unknown.
    pub per_target: BTreeMap<TargetLabel, TargetAcceptance>,
    pub untouched_macro: MacroStat,
    pub modified_macro: MacroStat,
}

pub fn acceptance_rates(snapshot: &VersionSnapshot) -> Result<AcceptanceRates, MetricError> {
    if !snapshot.version.frozen {
        return Err(MetricError::NotFrozen(snapshot.name().to_string()));
    }
    let reviewed: Vec<_> = snapshot.records.iter().filter(|r| r.is_reviewed()).collect();
    if reviewed.is_empty() {
        return Err(MetricError::NoReviewedRecords(snapshot.name().to_string()));
    }
    let pct = |count: usize, of: usize| 100.0 * count as f64 / of as f64;
    let count = |status: ReviewStatus| reviewed.iter().filter(|r| r.status == status).count();
    let n = reviewed.len();

    let labeled = reviewed.iter().all(|r| r.target.is_some());
    let mut per_target = BTreeMap::new();
    if labeled {
        for target in TargetLabel::ALL {
            let of_target: Vec<_> = reviewed.iter().filter(|r| r.target == Some(target)).collect();
            if of_target.is_empty() && !target.is_main() {
                continue;
            }
            let m = of_target.len();
            let share = |status: ReviewStatus| {
                (m > 0).then(|| pct(of_target.iter().filter(|r| r.status == status).count(), m))
            };
            per_target.insert(
                target,
                TargetAcceptance {
                    reviewed: m,
                    untouched_pct: share(ReviewStatus::Untouched),
                    modified_pct: share(ReviewStatus::Modified),
                },
            );
        }
    }
    let column = |f: fn(&TargetAcceptance) -> Option<f64>| -> BTreeMap<TargetLabel, Option<f64>> {
        per_target.iter().map(|(t, a)| (*t, f(a))).collect()
    };

    Ok(AcceptanceRates {
        reviewed: n,
        untouched_pct: pct(count(ReviewStatus::Untouched), n),
        modified_pct: pct(count(ReviewStatus::Modified), n),
        discarded_pct: pct(count(ReviewStatus::Discarded), n),
        untouched_macro: MacroStat::over_main(&column(|a| a.untouched_pct)),
        modified_macro: MacroStat::over_main(&column(|a| a.modified_pct)),
        per_target,
    })
}
