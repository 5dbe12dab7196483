//! Jaccard-based novelty of a corpus against a reference corpus.

use std::collections::HashMap;

use rayon::prelude::*;

use super::tokenize::TokenSequence;
use super::MetricError;

/// Sorted, deduplicated token ids of one unit.
type IdSet = Vec<u32>;

fn id_sets<'a>(
    corpus: &'a [TokenSequence],
    ids: &mut HashMap<&'a str, u32>,
) -> Vec<IdSet> {
    corpus
        .iter()
        .map(|seq| {
            let mut set: IdSet = seq
                .iter()
                .map(|t| {
                    let next = ids.len() as u32;
                    *ids.entry(t).or_insert(next)
                })
                .collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect()
}

fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared as f64 / (a.len() + b.len() - shared) as f64
}

/// Per-candidate novelty: one minus the best Jaccard similarity of its token
/// set to any reference unit.
pub fn novelty_scores(
    candidates: &[TokenSequence],
    reference: &[TokenSequence],
) -> Result<Vec<f64>, MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::EmptyCandidates);
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyReferenceCorpus);
    }
    let mut ids = HashMap::new();
    let cand = id_sets(candidates, &mut ids);
    let refs = id_sets(reference, &mut ids);
    Ok(cand
        .par_iter()
        .map(|c| {
            let best = refs
                .iter()
                .map(|r| jaccard(c, r))
                .fold(0.0_f64, f64::max);
            1.0 - best
        })
        .collect())
}

/// Mean candidate novelty.
pub fn novelty(candidates: &[TokenSequence], reference: &[TokenSequence]) -> Result<f64, MetricError> {
    let scores = novelty_scores(candidates, reference)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;

    fn corpus(texts: &[&str]) -> Vec<TokenSequence> {
        texts.iter().map(|t| tokenize(t)).collect()
    }

    #[test]
    fn self_novelty_is_zero() {
        let c = corpus(&["a b c", "d e", "f"]);
        assert_eq!(novelty(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_is_one() {
        assert_eq!(novelty(&corpus(&["a b"]), &corpus(&["c d", "e"])).unwrap(), 1.0);
    }

    #[test]
    fn half_overlap() {
        let n = novelty(&corpus(&["a b d"]), &corpus(&["a b c"])).unwrap();
        assert_eq!(n, 0.5);
    }

    #[test]
    fn best_reference_wins() {
        let n = novelty(&corpus(&["a b"]), &corpus(&["x y", "a b z"])).unwrap();
        assert!((n - (1.0 - 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(novelty(&[], &corpus(&["a"])), Err(MetricError::EmptyCandidates));
        assert_eq!(novelty(&corpus(&["a"]), &[]), Err(MetricError::EmptyReferenceCorpus));
    }
}
