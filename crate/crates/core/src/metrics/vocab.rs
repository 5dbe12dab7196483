//! Vocabulary expansion: who contributed each word of a version, per target.
//!
//! Every distinct word of a target's final texts lands in exactly one bucket.
//! Words that also occur in that target's generated texts belong to the
//! author and are split by whether (and for which target) earlier versions
//! already used them; the rest belong to reviewers and are split by novelty.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::tokenize::{is_word_token, TokenSequence};
use super::MacroStat;
use crate::label::TargetLabel;

/// One accepted pair of the version under analysis.
#[derive(Clone, Debug)]
pub struct VocabUnit {
    pub target: TargetLabel,
    pub generated: TokenSequence,
    pub final_text: TokenSequence,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub author_novel: usize,
    pub author_same_target: usize,
    pub author_other_target: usize,
    pub reviewer_novel: usize,
    pub reviewer_not_novel: usize,
}

impl BucketCounts {
    pub fn total(&self) -> usize {
        self.author_novel
            + self.author_same_target
            + self.author_other_target
            + self.reviewer_novel
            + self.reviewer_not_novel
    }

    fn shares(&self) -> BucketShares {
        let total = self.total() as f64;
        let pct = |c: usize| 100.0 * c as f64 / total;
        BucketShares {
            author_novel: pct(self.author_novel),
            author_same_target: pct(self.author_same_target),
            author_other_target: pct(self.author_other_target),
            reviewer_novel: pct(self.reviewer_novel),
            reviewer_not_novel: pct(self.reviewer_not_novel),
        }
    }
}

/// Bucket sizes as percentages of a target's final-text vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketShares {
    pub author_novel: f64,
    pub author_same_target: f64,
    pub author_other_target: f64,
    pub reviewer_novel: f64,
    pub reviewer_not_novel: f64,
}

impl BucketShares {
    fn as_array(&self) -> [f64; 5] {
        [
            self.author_novel,
            self.author_same_target,
            self.author_other_target,
            self.reviewer_novel,
            self.reviewer_not_novel,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetVocabulary {
    pub counts: BucketCounts,
    pub shares: BucketShares,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketMacro {
    pub author_novel: MacroStat,
    pub author_same_target: MacroStat,
    pub author_other_target: MacroStat,
    pub reviewer_novel: MacroStat,
    pub reviewer_not_novel: MacroStat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VocabularyExpansion {
    pub per_target: BTreeMap<TargetLabel, TargetVocabulary>,
    /// Over the main targets that have accepted pairs in this version.
    pub macro_stats: BucketMacro,
}

fn words(seq: &TokenSequence) -> impl Iterator<Item = &str> {
    seq.iter().filter(|t| is_word_token(t))
}

pub fn vocabulary_expansion(
    current: &[VocabUnit],
    history: &[(TargetLabel, TokenSequence)],
) -> VocabularyExpansion {
    let mut seen_any: HashSet<&str> = HashSet::new();
    let mut seen_by_target: BTreeMap<TargetLabel, HashSet<&str>> = BTreeMap::new();
    for (target, text) in history {
        let set = seen_by_target.entry(*target).or_default();
        for w in words(text) {
            seen_any.insert(w);
            set.insert(w);
        }
    }

    let mut final_vocab: BTreeMap<TargetLabel, BTreeSet<&str>> = BTreeMap::new();
    let mut generated_vocab: BTreeMap<TargetLabel, HashSet<&str>> = BTreeMap::new();
    for unit in current {
        final_vocab.entry(unit.target).or_default().extend(words(&unit.final_text));
        generated_vocab.entry(unit.target).or_default().extend(words(&unit.generated));
    }

    let empty = HashSet::new();
    let mut per_target = BTreeMap::new();
    for (target, vocab) in &final_vocab {
        if vocab.is_empty() {
            continue;
        }
        let generated = generated_vocab.get(target).unwrap_or(&empty);
        let same_target = seen_by_target.get(target).unwrap_or(&empty);
        let mut counts = BucketCounts::default();
        for w in vocab {
            let known = seen_any.contains(w);
            match (generated.contains(w), known) {
                (true, false) => counts.author_novel += 1,
                (true, true) if same_target.contains(w) => counts.author_same_target += 1,
                (true, true) => counts.author_other_target += 1,
                (false, false) => counts.reviewer_novel += 1,
                (false, true) => counts.reviewer_not_novel += 1,
            }
        }
        per_target.insert(
            *target,
            TargetVocabulary {
                counts,
                shares: counts.shares(),
            },
        );
    }

    let main: Vec<[f64; 5]> = TargetLabel::MAIN
        .iter()
        .filter_map(|t| per_target.get(t))
        .map(|v| v.shares.as_array())
        .collect();
    let column = |i: usize| MacroStat::over(&main.iter().map(|row| row[i]).collect::<Vec<_>>());
    VocabularyExpansion {
        per_target,
        macro_stats: BucketMacro {
            author_novel: column(0),
            author_same_target: column(1),
            author_other_target: column(2),
            reviewer_novel: column(3),
            reviewer_not_novel: column(4),
        },
    }
}
