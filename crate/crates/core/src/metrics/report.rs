//! The per-loop report: every statistic for one frozen version, laid out
//! like the comparison tables (one named row per statistic).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::acceptance::{acceptance_rates, AcceptanceRates};
use super::balance::{distribution_balance, Balance, FrequencyMode};
use super::hter::{hter_aggregate, HterAggregate, HterScope};
use super::imbalance::{imbalance_degree, Distance};
use super::lengths::{length_stats, LengthStats};
use super::novelty::novelty_scores;
use super::repetition::repetition_rate;
use super::tokenize::TokenSequence;
use super::units::UnitSelector;
use super::vocab::{vocabulary_expansion, VocabUnit, VocabularyExpansion};
use super::{mean, MacroStat, MetricError};
use crate::label::TargetLabel;
use crate::record::{PairRecord, ReviewStatus, VersionSnapshot};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    /// Category subset behind the "6 cat." balance rows.
    pub six_categories: Vec<TargetLabel>,
    pub distance: Distance,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            six_categories: TargetLabel::MAIN
                .iter()
                .copied()
                .filter(|&t| t != TargetLabel::Disabled)
                .collect(),
            distance: Distance::Euclidean,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub total: usize,
    pub pending: usize,
    pub untouched: usize,
    pub modified: usize,
    pub discarded_by_reviewer: usize,
    pub discarded_by_system: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BalancePair {
    pub abs: Option<Balance>,
    pub perc: Option<Balance>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub seven: BalancePair,
    pub six: BalancePair,
}

/// A corpus statistic with its per-target breakdown.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetedStat {
    pub micro: Option<f64>,
    pub per_target: BTreeMap<TargetLabel, Option<f64>>,
    pub macro_stat: MacroStat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    pub hter_all: HterAggregate,
    pub hter_modified: HterAggregate,
    /// Against everything accepted in earlier versions.
    pub novelty_cumulative: TargetedStat,
    /// Against the immediately preceding version.
    pub novelty_previous: TargetedStat,
    /// Against the first version.
    pub novelty_first: TargetedStat,
    pub repetition_rate: TargetedStat,
    pub vocabulary: VocabularyExpansion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitReports {
    pub pair: UnitReport,
    pub hs: UnitReport,
    pub cn: UnitReport,
}

impl UnitReports {
    pub fn get(&self, unit: UnitSelector) -> &UnitReport {
        match unit {
            UnitSelector::Pair => &self.pair,
            UnitSelector::Hs => &self.hs,
            UnitSelector::Cn => &self.cn,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopReport {
    pub version: String,
    pub predecessors: Vec<String>,
    pub counts: StatusCounts,
    /// Accepted pairs per target.
    pub target_counts: BTreeMap<TargetLabel, u64>,
    pub imbalance_degree: Option<f64>,
    pub six_categories: Vec<TargetLabel>,
    pub balance: BalanceReport,
    /// Absent when nothing was reviewed.
    pub acceptance: Option<AcceptanceRates>,
    pub lengths: LengthStats,
    pub units: UnitReports,
}

/// `history` holds the earlier versions oldest first; the last one is the
/// immediate predecessor.
pub fn loop_report(
    snapshot: &VersionSnapshot,
    history: &[VersionSnapshot],
    config: &ReportConfig,
) -> Result<LoopReport, MetricError> {
    if !snapshot.version.frozen {
        return Err(MetricError::NotFrozen(snapshot.name().to_string()));
    }
    let mut counts = StatusCounts {
        total: snapshot.records.len(),
        ..StatusCounts::default()
    };
    for r in &snapshot.records {
        match r.status {
            ReviewStatus::Pending => counts.pending += 1,
            ReviewStatus::Untouched => counts.untouched += 1,
            ReviewStatus::Modified => counts.modified += 1,
            ReviewStatus::Discarded if r.is_reviewer_discard() => counts.discarded_by_reviewer += 1,
            ReviewStatus::Discarded => counts.discarded_by_system += 1,
        }
    }

    let mut target_counts: BTreeMap<TargetLabel, u64> =
        TargetLabel::MAIN.iter().map(|&t| (t, 0)).collect();
    for r in snapshot.accepted() {
        if let Some(t) = r.target {
            *target_counts.entry(t).or_default() += 1;
        }
    }
    let main_counts: Vec<u64> = TargetLabel::MAIN.iter().map(|t| target_counts[t]).collect();
    let balance_pair = |categories: &[TargetLabel]| BalancePair {
        abs: distribution_balance(&target_counts, FrequencyMode::Abs, categories).ok(),
        perc: distribution_balance(&target_counts, FrequencyMode::Perc, categories).ok(),
    };

    let acceptance = match acceptance_rates(snapshot) {
        Ok(a) => Some(a),
        Err(MetricError::NoReviewedRecords(_)) => None,
        Err(e) => return Err(e),
    };

    let units = UnitReports {
        pair: unit_report(snapshot, history, UnitSelector::Pair)?,
        hs: unit_report(snapshot, history, UnitSelector::Hs)?,
        cn: unit_report(snapshot, history, UnitSelector::Cn)?,
    };

    Ok(LoopReport {
        version: snapshot.name().to_string(),
        predecessors: snapshot.version.predecessors.clone(),
        counts,
        imbalance_degree: imbalance_degree(&main_counts, config.distance).ok(),
        six_categories: config.six_categories.clone(),
        balance: BalanceReport {
            seven: balance_pair(&TargetLabel::MAIN),
            six: balance_pair(&config.six_categories),
        },
        target_counts,
        acceptance,
        lengths: length_stats(snapshot)?,
        units,
    })
}

/// Accepted records of a version, with the final tokens of `unit`.
fn accepted_texts(snapshot: &VersionSnapshot, unit: UnitSelector) -> Vec<(&PairRecord, TokenSequence)> {
    snapshot.accepted().map(|r| (r, unit.final_text(r))).collect()
}

fn unit_report(
    snapshot: &VersionSnapshot,
    history: &[VersionSnapshot],
    unit: UnitSelector,
) -> Result<UnitReport, MetricError> {
    let current = accepted_texts(snapshot, unit);
    let history_texts: Vec<Vec<(&PairRecord, TokenSequence)>> =
        history.iter().map(|h| accepted_texts(h, unit)).collect();
    let flatten = |versions: &[Vec<(&PairRecord, TokenSequence)>]| -> Vec<TokenSequence> {
        versions.iter().flatten().map(|(_, t)| t.clone()).collect()
    };
    let cumulative_ref = flatten(&history_texts);
    let previous_ref = flatten(history_texts.last().map(std::slice::from_ref).unwrap_or(&[]));
    let first_ref = flatten(history_texts.first().map(std::slice::from_ref).unwrap_or(&[]));

    let vocab_units: Vec<VocabUnit> = current
        .iter()
        .filter_map(|(r, final_text)| {
            Some(VocabUnit {
                target: r.target?,
                generated: unit.original(r),
                final_text: final_text.clone(),
            })
        })
        .collect();
    let vocab_history: Vec<(TargetLabel, TokenSequence)> = history_texts
        .iter()
        .flatten()
        .filter_map(|(r, t)| Some((r.target?, t.clone())))
        .collect();

    Ok(UnitReport {
        hter_all: hter_aggregate(snapshot, HterScope::All, unit)?,
        hter_modified: hter_aggregate(snapshot, HterScope::Modified, unit)?,
        novelty_cumulative: novelty_stat(&current, &cumulative_ref)?,
        novelty_previous: novelty_stat(&current, &previous_ref)?,
        novelty_first: novelty_stat(&current, &first_ref)?,
        repetition_rate: repetition_stat(&current),
        vocabulary: vocabulary_expansion(&vocab_units, &vocab_history),
    })
}

fn group_by_target<T: Clone>(current: &[(&PairRecord, TokenSequence)], values: &[T]) -> BTreeMap<TargetLabel, Vec<T>> {
    let mut groups: BTreeMap<TargetLabel, Vec<T>> =
        TargetLabel::MAIN.iter().map(|&t| (t, Vec::new())).collect();
    for ((r, _), v) in current.iter().zip(values) {
        if let Some(t) = r.target {
            groups.entry(t).or_default().push(v.clone());
        }
    }
    groups
}

/// Each target's candidates are scored against the whole reference corpus.
fn novelty_stat(
    current: &[(&PairRecord, TokenSequence)],
    reference: &[TokenSequence],
) -> Result<TargetedStat, MetricError> {
    if current.is_empty() || reference.is_empty() {
        return Ok(TargetedStat::default());
    }
    let candidates: Vec<TokenSequence> = current.iter().map(|(_, t)| t.clone()).collect();
    let scores = novelty_scores(&candidates, reference)?;
    let per_target: BTreeMap<TargetLabel, Option<f64>> = group_by_target(current, &scores)
        .into_iter()
        .map(|(t, v)| (t, mean(&v)))
        .collect();
    Ok(TargetedStat {
        micro: mean(&scores),
        macro_stat: MacroStat::over_main(&per_target),
        per_target,
    })
}

fn repetition_stat(current: &[(&PairRecord, TokenSequence)]) -> TargetedStat {
    let texts: Vec<TokenSequence> = current.iter().map(|(_, t)| t.clone()).collect();
    let per_target: BTreeMap<TargetLabel, Option<f64>> = group_by_target(current, &texts)
        .into_iter()
        .map(|(t, v)| (t, repetition_rate(&v).ok()))
        .collect();
    TargetedStat {
        micro: repetition_rate(&texts).ok(),
        macro_stat: MacroStat::over_main(&per_target),
        per_target,
    }
}

impl LoopReport {
    /// Table rows for one unit, labelled as in the paper's comparison table.
    pub fn rows(&self, unit: UnitSelector) -> Vec<(&'static str, Option<f64>)> {
        let b = &self.balance;
        let rmse = |x: Option<Balance>| x.map(|b| b.rmse);
        let mse = |x: Option<Balance>| x.map(|b| b.mse);
        let acc = self.acceptance.as_ref();
        let l = &self.lengths;
        let u = self.units.get(unit);
        let v = &u.vocabulary.macro_stats;
        vec![
            ("RMSE (abs.fr.) 7 cat.", rmse(b.seven.abs)),
            ("RMSE (perc.fr.) 7 cat.", rmse(b.seven.perc)),
            ("RMSE (abs.fr.) 6 cat.", rmse(b.six.abs)),
            ("RMSE (perc.fr.) 6 cat.", rmse(b.six.perc)),
            ("MSE (abs.fr.) 7 cat.", mse(b.seven.abs)),
            ("MSE (perc.fr.) 7 cat.", mse(b.seven.perc)),
            ("MSE (abs.fr.) 6 cat.", mse(b.six.abs)),
            ("MSE (perc.fr.) 6 cat.", mse(b.six.perc)),
            ("Accept.rate (untouched)", acc.map(|a| a.untouched_pct)),
            ("Accept.rate (modified)", acc.map(|a| a.modified_pct)),
            ("Percentage of discarded pairs", acc.map(|a| a.discarded_pct)),
            ("Accept.rate (untouched) macro avg", acc.and_then(|a| a.untouched_macro.avg)),
            ("Accept.rate (untouched) macro std", acc.and_then(|a| a.untouched_macro.std)),
            ("Accept.rate (mod.) macro avg", acc.and_then(|a| a.modified_macro.avg)),
            ("Accept.rate (mod.) macro std", acc.and_then(|a| a.modified_macro.std)),
            ("Avg length CN_or annotated", l.cn_or_annotated),
            ("Avg length CN_ed annotated", l.cn_ed_annotated),
            ("Avg length CN_or untouched", l.cn_or_untouched),
            ("Avg length CN_or discarded", l.cn_or_discarded),
            ("Avg length HS_or untouched", l.hs_or_untouched),
            ("HTER (all)", u.hter_all.micro),
            ("HTER macro avg (all)", u.hter_all.macro_stat.avg),
            ("HTER macro std (all)", u.hter_all.macro_stat.std),
            ("HTER (mod.)", u.hter_modified.micro),
            ("HTER macro avg (mod.)", u.hter_modified.macro_stat.avg),
            ("HTER macro std (mod.)", u.hter_modified.macro_stat.std),
            ("Nov. cumulative", u.novelty_cumulative.micro),
            ("Nov. cumulative macro avg", u.novelty_cumulative.macro_stat.avg),
            ("Nov. cumulative macro std", u.novelty_cumulative.macro_stat.std),
            ("Nov. V(i) - V(i+1)", u.novelty_previous.micro),
            ("Nov. V(i) - V(i+1) macro avg", u.novelty_previous.macro_stat.avg),
            ("Nov. V(i) - V(i+1) macro std", u.novelty_previous.macro_stat.std),
            ("Nov. V(1) - V(i)", u.novelty_first.micro),
            ("Nov. V(1) - V(i) macro avg", u.novelty_first.macro_stat.avg),
            ("Nov. V(1) - V(i) macro std", u.novelty_first.macro_stat.std),
            ("RR", u.repetition_rate.micro),
            ("RR macro avg", u.repetition_rate.macro_stat.avg),
            ("RR macro std", u.repetition_rate.macro_stat.std),
            ("Vocab. gpt2 novel", v.author_novel.avg),
            ("Vocab. gpt2 novel (std)", v.author_novel.std),
            ("Vocab. gpt2 same target", v.author_same_target.avg),
            ("Vocab. gpt2 same target (std)", v.author_same_target.std),
            ("Vocab. gpt2 other target", v.author_other_target.avg),
            ("Vocab. gpt2 other target (std)", v.author_other_target.std),
            ("Vocab. human novel", v.reviewer_novel.avg),
            ("Vocab. human novel (std)", v.reviewer_novel.std),
            ("Vocab. human not novel", v.reviewer_not_novel.avg),
            ("Vocab. human not novel (std)", v.reviewer_not_novel.std),
            ("Imbalance degree", self.imbalance_degree),
        ]
    }
}

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) if v.is_finite() => format!("{v:.3}"),
        _ => "NaN".to_string(),
    }
}

/// Aligned text table with one column per report.
pub fn render_table(reports: &[LoopReport], unit: UnitSelector) -> String {
    let columns: Vec<Vec<(&str, Option<f64>)>> = reports.iter().map(|r| r.rows(unit)).collect();
    let Some(first) = columns.first() else {
        return String::new();
    };
    let label_width = first.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let widths: Vec<usize> = reports
        .iter()
        .zip(&columns)
        .map(|(r, col)| col.iter().map(|(_, v)| cell(*v).len()).chain([r.version.len()]).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for (r, w) in reports.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", r.version);
    }
    out.push('\n');
    for (i, (label, _)) in first.iter().enumerate() {
        let _ = write!(out, "{label:label_width$}");
        for (col, w) in columns.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", cell(col[i].1));
        }
        out.push('\n');
    }
    out
}
