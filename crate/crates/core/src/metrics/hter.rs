//! Post-editing effort: TER from each generated text to its final form.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ter::ter_edits;
use super::units::UnitSelector;
use super::{mean, MacroStat, MetricError};
use crate::label::TargetLabel;
use crate::record::{PairRecord, ReviewStatus, VersionSnapshot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HterScope {
    /// Every accepted pair; untouched ones count as zero.
    All,
    Modified,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HterAggregate {
    pub pairs: usize,
    pub micro: Option<f64>,
    pub per_target: BTreeMap<TargetLabel, Option<f64>>,
    pub macro_stat: MacroStat,
}

/// HTER of one accepted record.
pub fn pair_hter(record: &PairRecord, unit: UnitSelector) -> Result<f64, MetricError> {
    if record.status == ReviewStatus::Untouched {
        return Ok(0.0);
    }
    let hyp = unit.original(record);
    let reference = unit.final_text(record);
    Ok(ter_edits(hyp.tokens(), reference.tokens())?.score())
}

pub fn hter_aggregate(
    snapshot: &VersionSnapshot,
    scope: HterScope,
    unit: UnitSelector,
) -> Result<HterAggregate, MetricError> {
    if !snapshot.version.frozen {
        return Err(MetricError::NotFrozen(snapshot.name().to_string()));
    }
    let in_scope: Vec<&PairRecord> = snapshot
        .accepted()
        .filter(|r| scope == HterScope::All || r.status == ReviewStatus::Modified)
        .collect();
    let scores: Vec<f64> = in_scope
        .par_iter()
        .map(|r| pair_hter(r, unit))
        .collect::<Result<_, _>>()?;

    let mut by_target: BTreeMap<TargetLabel, Vec<f64>> = TargetLabel::MAIN
        .iter()
        .map(|&t| (t, Vec::new()))
        .collect();
    for (r, s) in in_scope.iter().zip(&scores) {
        if let Some(t) = r.target {
            by_target.entry(t).or_default().push(*s);
        }
    }
    let per_target: BTreeMap<TargetLabel, Option<f64>> =
        by_target.iter().map(|(t, v)| (*t, mean(v))).collect();

    Ok(HterAggregate {
        pairs: scores.len(),
        micro: mean(&scores),
        macro_stat: MacroStat::over_main(&per_target),
        per_target,
    })
}
