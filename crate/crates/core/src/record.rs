//! Pair records, review decisions and version metadata.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar;
use crate::label::TargetLabel;

/// Strategy tag carried by seed pairs.
pub const SEED_STRATEGY: &str = "SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReviewStatus {
    Pending,
    Untouched,
    Modified,
    Discarded,
}

impl ReviewStatus {
    pub fn is_accepted(self) -> bool {
        matches!(self, ReviewStatus::Untouched | ReviewStatus::Modified)
    }
}

/// A record field broke one of the pair invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("field `{field}`: {reason}")]
pub struct InvariantViolation {
    pub field: &'static str,
    pub reason: String,
}

fn violation(field: &'static str, reason: impl Into<String>) -> InvariantViolation {
    InvariantViolation {
        field,
        reason: reason.into(),
    }
}

/// One HS/CN candidate and its review state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    #[serde(default)]
    pub version: String,
    pub hs_original: String,
    pub cn_original: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_edited: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn_edited: Option<String>,
    pub status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_index: Option<u32>,
    /// Set when the system, not a reviewer, settled the record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn default_strategy() -> String {
    SEED_STRATEGY.to_string()
}

impl PairRecord {
    /// A fresh candidate awaiting review.
    pub fn pending(id: impl Into<String>, version: impl Into<String>, hs: String, cn: String) -> Self {
        PairRecord {
            id: id.into(),
            version: version.into(),
            hs_original: hs,
            cn_original: cn,
            hs_edited: None,
            cn_edited: None,
            status: ReviewStatus::Pending,
            target: None,
            annotator: None,
            strategy: default_strategy(),
            chunk_id: None,
            chunk_index: None,
            note: None,
        }
    }

    pub fn hs_final(&self) -> &str {
        self.hs_edited.as_deref().unwrap_or(&self.hs_original)
    }

    pub fn cn_final(&self) -> &str {
        self.cn_edited.as_deref().unwrap_or(&self.cn_original)
    }

    pub fn is_accepted(&self) -> bool {
        self.status.is_accepted()
    }

    /// Discarded by a reviewer rather than swept by the system.
    pub fn is_reviewer_discard(&self) -> bool {
        self.status == ReviewStatus::Discarded && self.note.is_none()
    }

    /// Settled by a reviewer: accepted, or discarded by a human.
    pub fn is_reviewed(&self) -> bool {
        self.is_accepted() || self.is_reviewer_discard()
    }

    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.id.trim().is_empty() {
            return Err(violation("id", "must not be empty"));
        }
        check_text("hs_original", &self.hs_original)?;
        check_text("cn_original", &self.cn_original)?;
        if let Some(hs) = &self.hs_edited {
            check_text("hs_edited", hs)?;
        }
        if let Some(cn) = &self.cn_edited {
            check_text("cn_edited", cn)?;
        }
        match self.status {
            ReviewStatus::Modified => {
                let hs = self
                    .hs_edited
                    .as_ref()
                    .ok_or_else(|| violation("hs_edited", "required when status is MODIFIED"))?;
                let cn = self
                    .cn_edited
                    .as_ref()
                    .ok_or_else(|| violation("cn_edited", "required when status is MODIFIED"))?;
                if *hs == self.hs_original && *cn == self.cn_original {
                    return Err(violation(
                        "cn_edited",
                        "MODIFIED pair must differ from the original",
                    ));
                }
            }
            ReviewStatus::Untouched | ReviewStatus::Discarded | ReviewStatus::Pending => {
                if self.hs_edited.is_some() {
                    return Err(violation("hs_edited", "only allowed when status is MODIFIED"));
                }
                if self.cn_edited.is_some() {
                    return Err(violation("cn_edited", "only allowed when status is MODIFIED"));
                }
            }
        }
        if self.status.is_accepted() && self.target.is_none() {
            return Err(violation("target", "accepted pairs need a target label"));
        }
        Ok(())
    }
}

fn check_text(field: &'static str, text: &str) -> Result<(), InvariantViolation> {
    if text.trim().is_empty() {
        return Err(violation(field, "must not be empty"));
    }
    if let Some(token) = grammar::find_special_token(text) {
        return Err(violation(field, format!("contains special token `{token}`")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Untouched,
    Modified,
    Discarded,
}

impl From<Verdict> for ReviewStatus {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Untouched => ReviewStatus::Untouched,
            Verdict::Modified => ReviewStatus::Modified,
            Verdict::Discarded => ReviewStatus::Discarded,
        }
    }
}

/// A single verdict on a pending pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub pair_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_edited: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn_edited: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetLabel>,
    /// `None` marks a system decision, which must carry a `note`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReviewDecision {
    pub fn untouched(pair_id: impl Into<String>, target: TargetLabel, annotator: impl Into<String>) -> Self {
        ReviewDecision {
            pair_id: pair_id.into(),
            verdict: Verdict::Untouched,
            hs_edited: None,
            cn_edited: None,
            target: Some(target),
            annotator: Some(annotator.into()),
            elapsed_seconds: None,
            note: None,
        }
    }

    pub fn modified(
        pair_id: impl Into<String>,
        hs_edited: impl Into<String>,
        cn_edited: impl Into<String>,
        target: TargetLabel,
        annotator: impl Into<String>,
    ) -> Self {
        ReviewDecision {
            hs_edited: Some(hs_edited.into()),
            cn_edited: Some(cn_edited.into()),
            verdict: Verdict::Modified,
            ..ReviewDecision::untouched(pair_id, target, annotator)
        }
    }

    pub fn discarded(pair_id: impl Into<String>, annotator: impl Into<String>) -> Self {
        ReviewDecision {
            pair_id: pair_id.into(),
            verdict: Verdict::Discarded,
            hs_edited: None,
            cn_edited: None,
            target: None,
            annotator: Some(annotator.into()),
            elapsed_seconds: None,
            note: None,
        }
    }

    pub fn system_discard(pair_id: impl Into<String>, note: impl Into<String>) -> Self {
        ReviewDecision {
            annotator: None,
            note: Some(note.into()),
            ..ReviewDecision::discarded(pair_id, "")
        }
    }

    /// Checks field presence against the verdict.
    pub fn validate_shape(&self) -> Result<(), InvariantViolation> {
        match self.verdict {
            Verdict::Modified => {
                if self.hs_edited.is_none() {
                    return Err(violation("hs_edited", "required for a MODIFIED verdict"));
                }
                if self.cn_edited.is_none() {
                    return Err(violation("cn_edited", "required for a MODIFIED verdict"));
                }
            }
            Verdict::Untouched | Verdict::Discarded => {
                if self.hs_edited.is_some() {
                    return Err(violation("hs_edited", "only allowed for a MODIFIED verdict"));
                }
                if self.cn_edited.is_some() {
                    return Err(violation("cn_edited", "only allowed for a MODIFIED verdict"));
                }
            }
        }
        if self.verdict != Verdict::Discarded && self.target.is_none() {
            return Err(violation("target", "accepted pairs need a target label"));
        }
        match (&self.annotator, &self.note) {
            (None, None) => Err(violation("annotator", "required for reviewer decisions")),
            (Some(a), _) if a.trim().is_empty() => Err(violation("annotator", "must not be empty")),
            _ => Ok(()),
        }
    }

    /// The record after applying this decision to `pending`. The result is
    /// validated against the record invariants.
    pub fn apply_to(&self, pending: &PairRecord) -> Result<PairRecord, InvariantViolation> {
        self.validate_shape()?;
        let mut next = pending.clone();
        next.status = self.verdict.into();
        next.hs_edited = self.hs_edited.clone();
        next.cn_edited = self.cn_edited.clone();
        // A discard keeps any target the record was generated for.
        if self.target.is_some() {
            next.target = self.target;
        }
        next.annotator = self.annotator.clone();
        next.note = self.note.clone();
        next.validate()?;
        Ok(next)
    }
}

/// One loop snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetVersion {
    pub name: String,
    pub predecessors: Vec<String>,
    pub pair_ids: Vec<String>,
    pub frozen: bool,
    pub quota: u32,
}

/// A version together with its records, in insertion order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VersionSnapshot {
    pub version: DatasetVersion,
    pub records: Vec<PairRecord>,
}

impl VersionSnapshot {
    pub fn name(&self) -> &str {
        &self.version.name
    }

    pub fn accepted(&self) -> impl Iterator<Item = &PairRecord> {
        self.records.iter().filter(|r| r.is_accepted())
    }
}

/// One author response and what became of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationChunk {
    pub id: String,
    pub version: String,
    /// Position in the loop's chunk sequence; drives condition cycling.
    pub sequence: u32,
    pub strategy: String,
    pub condition: String,
    /// `None` when the author call failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    pub parsed: usize,
    pub admitted: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<grammar::Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> PairRecord {
        PairRecord::pending("p1", "V2", "hs text".into(), "cn text".into())
    }

    #[test]
    fn pending_record_is_valid() {
        base().validate().unwrap();
    }

    #[test]
    fn modified_needs_both_edits() {
        let mut r = base();
        r.status = ReviewStatus::Modified;
        r.target = Some(TargetLabel::Jews);
        r.hs_edited = Some("hs text".into());
        assert_eq!(r.validate().unwrap_err().field, "cn_edited");
    }

    #[test]
    fn modified_must_change_something() {
        let mut r = base();
        r.status = ReviewStatus::Modified;
        r.target = Some(TargetLabel::Jews);
        r.hs_edited = Some("hs text".into());
        r.cn_edited = Some("cn text".into());
        assert!(r.validate().is_err());
        r.cn_edited = Some("cn text, edited".into());
        r.validate().unwrap();
    }

    #[test]
    fn accepted_needs_target() {
        let mut r = base();
        r.status = ReviewStatus::Untouched;
        assert_eq!(r.validate().unwrap_err().field, "target");
    }

    #[test]
    fn discarded_may_not_carry_edits() {
        let mut r = base();
        r.status = ReviewStatus::Discarded;
        r.cn_edited = Some("x".into());
        assert_eq!(r.validate().unwrap_err().field, "cn_edited");
    }

    #[test]
    fn special_tokens_rejected_in_text() {
        let mut r = base();
        r.cn_original = "fine <|endofcn|> not".into();
        assert_eq!(r.validate().unwrap_err().field, "cn_original");
    }

    #[test]
    fn jsonl_omits_absent_optionals() {
        let json = serde_json::to_string(&base()).unwrap();
        assert!(!json.contains("hs_edited"));
        assert!(!json.contains("target"));
        assert!(json.contains("\"status\":\"PENDING\""));
    }

    #[test]
    fn decision_shapes() {
        let mut d = ReviewDecision::modified("p1", "a", "b", TargetLabel::Women, "ann");
        d.validate_shape().unwrap();
        d.cn_edited = None;
        assert_eq!(d.validate_shape().unwrap_err().field, "cn_edited");
        let d = ReviewDecision::discarded("p1", "ann");
        d.validate_shape().unwrap();
        let mut d = ReviewDecision::untouched("p1", TargetLabel::Jews, "ann");
        d.target = None;
        assert_eq!(d.validate_shape().unwrap_err().field, "target");
    }

    #[test]
    fn discard_keeps_generation_target() {
        let mut r = base();
        r.target = Some(TargetLabel::Poc);
        let out = ReviewDecision::discarded("p1", "ann").apply_to(&r).unwrap();
        assert_eq!(out.status, ReviewStatus::Discarded);
        assert_eq!(out.target, Some(TargetLabel::Poc));
    }
}
