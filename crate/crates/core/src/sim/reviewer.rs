//! A seeded reviewer that accepts, post-edits or discards by coin flip.

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mock_author::MockAuthorConfig;
use crate::label::TargetLabel;
use crate::record::{PairRecord, ReviewDecision};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditWeights {
    pub substitute: f64,
    pub insert: f64,
    pub delete: f64,
    pub shift: f64,
}

impl Default for EditWeights {
    fn default() -> Self {
        EditWeights { substitute: 0.4, insert: 0.3, delete: 0.2, shift: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Substitute,
    Insert,
    Delete,
    /// Moves a block of one to three words.
    Shift,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    /// Keep the target the pair was generated for; detect it from the mock
    /// word lists otherwise.
    Generation,
    /// Always detect from the mock word lists.
    Vocabulary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedReviewerConfig {
    pub seed: u64,
    pub p_untouched: f64,
    pub p_modified: f64,
    pub edit_weights: EditWeights,
    pub min_edits: usize,
    pub max_edits: usize,
    /// Chance that a modified pair also gets its HS edited.
    pub p_edit_hs: f64,
    pub label_policy: LabelPolicy,
    /// Words used for substitutions and insertions.
    pub edit_words: Vec<String>,
}

impl Default for ScriptedReviewerConfig {
    fn default() -> Self {
        ScriptedReviewerConfig {
            seed: 0,
            p_untouched: 0.15,
            p_modified: 0.45,
            edit_weights: EditWeights::default(),
            min_edits: 1,
            max_edits: 3,
            p_edit_hs: 0.3,
            label_policy: LabelPolicy::Generation,
            edit_words: "actually really indeed however evidence people facts respect together many"
                .split_whitespace()
                .map(str::to_string)
                .collect(),
        }
    }
}

impl ScriptedReviewerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p_untouched) || !ok(self.p_modified) || self.p_untouched + self.p_modified > 1.0 + 1e-12 {
            return Err("verdict probabilities must lie in [0,1] and sum to at most 1".into());
        }
        let w = self.edit_weights;
        if [w.substitute, w.insert, w.delete, w.shift].iter().any(|x| *x < 0.0)
            || w.substitute + w.insert + w.delete + w.shift <= 0.0
        {
            return Err("edit weights must be non-negative with a positive sum".into());
        }
        if self.edit_words.is_empty() {
            return Err("edit_words must not be empty".into());
        }
        if self.min_edits == 0 || self.max_edits < self.min_edits {
            return Err("need 1 <= min_edits <= max_edits".into());
        }
        Ok(())
    }
}

/// Applies one word-level edit. Returns false if it could not change the text.
pub fn apply_edit(words: &mut Vec<String>, op: EditOp, rng: &mut impl Rng, vocabulary: &[String]) -> bool {
    let before = words.clone();
    match op {
        EditOp::Substitute if !words.is_empty() => {
            let i = rng.gen_range(0..words.len());
            words[i] = vocabulary.choose(rng).expect("non-empty").clone();
        }
        EditOp::Insert => {
            let i = rng.gen_range(0..=words.len());
            words.insert(i, vocabulary.choose(rng).expect("non-empty").clone());
        }
        EditOp::Delete if words.len() > 1 => {
            let i = rng.gen_range(0..words.len());
            words.remove(i);
        }
        EditOp::Shift if words.len() > 1 => {
            let len = rng.gen_range(1..=3.min(words.len() - 1));
            let start = rng.gen_range(0..=words.len() - len);
            let block: Vec<String> = words.drain(start..start + len).collect();
            let dest = rng.gen_range(0..=words.len());
            words.splice(dest..dest, block);
        }
        _ => {}
    }
    *words != before
}

pub struct ScriptedReviewer {
    config: ScriptedReviewerConfig,
    author: Arc<MockAuthorConfig>,
    rng: ChaCha8Rng,
    ops: WeightedIndex<f64>,
}

const OPS: [EditOp; 4] = [EditOp::Substitute, EditOp::Insert, EditOp::Delete, EditOp::Shift];

impl ScriptedReviewer {
    pub fn new(config: ScriptedReviewerConfig, author: Arc<MockAuthorConfig>) -> Result<Self, String> {
        config.validate()?;
        let w = config.edit_weights;
        let ops = WeightedIndex::new([w.substitute, w.insert, w.delete, w.shift]).map_err(|e| e.to_string())?;
        Ok(ScriptedReviewer { rng: ChaCha8Rng::seed_from_u64(config.seed), config, author, ops })
    }

    pub fn label(&self, record: &PairRecord) -> TargetLabel {
        let detected = || self.author.detect_target(&record.hs_original).unwrap_or(TargetLabel::Other);
        match self.config.label_policy {
            LabelPolicy::Generation => record.target.unwrap_or_else(detected),
            LabelPolicy::Vocabulary => detected(),
        }
    }

    fn edit(&mut self, text: &str) -> String {
        let mut words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        let n = self.rng.gen_range(self.config.min_edits..=self.config.max_edits);
        let mut changed = false;
        for _ in 0..n {
            let op = OPS[self.ops.sample(&mut self.rng)];
            changed |= apply_edit(&mut words, op, &mut self.rng, &self.config.edit_words);
        }
        let mut out = words.join(" ");
        if !changed || out == text {
            // Shifts and substitutions can cancel out; make sure the text moved.
            out.push_str(" indeed");
        }
        out
    }

    pub fn review(&mut self, record: &PairRecord, annotator: &str) -> ReviewDecision {
        let roll: f64 = self.rng.gen();
        if roll < self.config.p_untouched {
            ReviewDecision::untouched(record.id.clone(), self.label(record), annotator)
        } else if roll < self.config.p_untouched + self.config.p_modified {
            let edit_hs = self.rng.gen_bool(self.config.p_edit_hs);
            let hs = if edit_hs { self.edit(&record.hs_original) } else { record.hs_original.clone() };
            let cn = self.edit(&record.cn_original);
            ReviewDecision::modified(record.id.clone(), hs, cn, self.label(record), annotator)
        } else {
            ReviewDecision::discarded(record.id.clone(), annotator)
        }
    }
}
