//! Conditioning strategies and the prompts they produce.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{self, ExportFormat, OPEN_HS};
use crate::label::TargetLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StrategyKind {
    /// Bare open tag.
    Plain,
    /// Implied statements from a labeled pool, appended to the open tag.
    Sbf,
    /// Labeled open tag cycling the main targets.
    Lab,
    /// Gold hate speech appended to the open tag.
    Arg,
    /// Labeled open tag plus a pooled statement for that target.
    Mix,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Plain => "PLAIN",
            StrategyKind::Sbf => "SBF",
            StrategyKind::Lab => "LAB",
            StrategyKind::Arg => "ARG",
            StrategyKind::Mix => "MIX",
        }
    }

    /// Format used both to parse the author's output and to export its
    /// training data.
    pub fn format(self) -> ExportFormat {
        match self {
            StrategyKind::Lab | StrategyKind::Mix => ExportFormat::Labeled,
            _ => ExportFormat::Plain,
        }
    }

    pub fn needs_pool(self) -> bool {
        matches!(self, StrategyKind::Sbf | StrategyKind::Arg | StrategyKind::Mix)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PLAIN" => Ok(StrategyKind::Plain),
            "SBF" => Ok(StrategyKind::Sbf),
            "LAB" => Ok(StrategyKind::Lab),
            "ARG" => Ok(StrategyKind::Arg),
            "MIX" => Ok(StrategyKind::Mix),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// External label (lowercased) → target.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMapping(pub BTreeMap<String, TargetLabel>);

impl LabelMapping {
    /// The mapping used to condition on implied statements.
    pub fn sbf_default() -> Self {
        serde_json::from_str(include_str!("../../config/sbf_label_mapping.json"))
            .expect("bundled mapping is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, TargetLabel> = serde_json::from_str(text)?;
        Ok(LabelMapping(raw.into_iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect()))
    }

    /// Canonical label spellings always resolve; other names go through
    /// the table.
    pub fn resolve(&self, label: &str) -> Option<TargetLabel> {
        let label = label.trim();
        TargetLabel::from_str(label)
            .ok()
            .or_else(|| self.0.get(&label.to_lowercase()).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("pool line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("pool line {line}: {reason}")]
    BadText { line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetLabel>,
    pub text: String,
}

/// Conditioning texts, one per line, optionally `label<TAB>text`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConditionPool(pub Vec<PoolEntry>);

impl ConditionPool {
    pub fn parse(text: &str, mapping: &LabelMapping) -> Result<Self, PoolError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (target, body) = match line.split_once('\t') {
                Some((label, body)) => {
                    let target = mapping.resolve(label).ok_or_else(|| PoolError::UnknownLabel {
                        line: n,
                        label: label.to_string(),
                    })?;
                    (Some(target), body)
                }
                None => (None, line),
            };
            let body = body.trim();
            if body.is_empty() {
                return Err(PoolError::BadText { line: n, reason: "empty text".into() });
            }
            if let Some(tok) = grammar::find_special_token(body) {
                return Err(PoolError::BadText { line: n, reason: format!("contains `{tok}`") });
            }
            entries.push(PoolEntry { target, text: body.to_string() });
        }
        Ok(ConditionPool(entries))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn for_target(&self, target: TargetLabel) -> Vec<&PoolEntry> {
        self.0.iter().filter(|e| e.target == Some(target)).collect()
    }

    /// Targets with at least one entry, in canonical order.
    fn targets(&self) -> Vec<TargetLabel> {
        TargetLabel::ALL
            .into_iter()
            .filter(|t| self.0.iter().any(|e| e.target == Some(*t)))
            .collect()
    }
}

/// The prompt sent for one chunk and the target it aims at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetLabel>,
}

fn prefixed(open: String, statement: &str) -> String {
    format!("{open} {statement}")
}

/// Condition for the chunk at position `seq` of a loop. Pool-driven
/// strategies must have a non-empty pool.
pub fn condition(kind: StrategyKind, pool: &ConditionPool, seq: u32) -> Condition {
    let seq = seq as usize;
    let main = &TargetLabel::MAIN;
    match kind {
        StrategyKind::Plain => Condition { text: OPEN_HS.to_string(), target: None },
        StrategyKind::Lab => {
            let t = main[seq % main.len()];
            Condition { text: grammar::open_tag(Some(t)), target: Some(t) }
        }
        StrategyKind::Mix => {
            let t = main[seq % main.len()];
            let entries = pool.for_target(t);
            let text = if entries.is_empty() {
                grammar::open_tag(Some(t))
            } else {
                let e = entries[(seq / main.len()) % entries.len()];
                prefixed(grammar::open_tag(Some(t)), &e.text)
            };
            Condition { text, target: Some(t) }
        }
        StrategyKind::Sbf => {
            let targets = pool.targets();
            if targets.is_empty() {
                let e = &pool.0[seq % pool.0.len()];
                return Condition { text: prefixed(grammar::open_tag(None), &e.text), target: None };
            }
            let t = targets[seq % targets.len()];
            let entries = pool.for_target(t);
            let e = entries[(seq / targets.len()) % entries.len()];
            Condition { text: prefixed(grammar::open_tag(None), &e.text), target: Some(t) }
        }
        StrategyKind::Arg => {
            let e = &pool.0[seq % pool.0.len()];
            Condition { text: prefixed(grammar::open_tag(None), &e.text), target: e.target }
        }
    }
}
