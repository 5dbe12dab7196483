//! Translation edit rate with block shifts.
//!
//! The edit distance is word-level Levenshtein with unit costs. Shifts move a
//! contiguous hypothesis block to another position for a cost of one.
//!
//! The search runs in two phases. The greedy loop repeatedly applies the
//! shift of a reference-matching block that most reduces the edit distance;
//! its result is an upper bound. When that bound is not already equal to the
//! bag-of-words lower bound, a breadth-first search over block moves refines
//! it. The refinement visits at most [`REFINE_BUDGET`] arrangements, so it is
//! exact for hypotheses of up to eight tokens and best-effort beyond.

use std::collections::{HashMap, HashSet};

use super::tokenize::TokenSequence;
use super::MetricError;

/// Longest block that may be moved by a single shift.
pub const MAX_SHIFT_SIZE: usize = 10;
/// Upper bound on the number of shifts the greedy loop will apply.
pub const MAX_SHIFTS: usize = 50;
/// Distinct arrangements the refinement phase may evaluate (8! = 40320).
pub const REFINE_BUDGET: usize = 50_000;

/// Edit counts behind a TER score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TerEdits {
    pub shifts: usize,
    /// Insertions + deletions + substitutions after shifting.
    pub edit_distance: usize,
    pub reference_len: usize,
}

impl TerEdits {
    pub fn total(&self) -> usize {
        self.shifts + self.edit_distance
    }

    pub fn score(&self) -> f64 {
        self.total() as f64 / self.reference_len as f64
    }
}

/// TER of `hypothesis` against `reference`. May exceed 1.
pub fn ter(hypothesis: &TokenSequence, reference: &TokenSequence) -> Result<f64, MetricError> {
    ter_edits(hypothesis.tokens(), reference.tokens()).map(|e| e.score())
}

/// Edit counts for any comparable token type.
pub fn ter_edits<T: Eq + std::hash::Hash>(
    hypothesis: &[T],
    reference: &[T],
) -> Result<TerEdits, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    // Intern to dense ids so the inner loops compare integers.
    let mut ids: HashMap<&T, u32> = HashMap::new();
    let mut intern = |t| -> u32 {
        let next = ids.len() as u32;
        *ids.entry(t).or_insert(next)
    };
    let hyp: Vec<u32> = hypothesis.iter().map(&mut intern).collect();
    let reference: Vec<u32> = reference.iter().map(&mut intern).collect();
    let greedy = greedy_shift_search(hyp.clone(), &reference);
    Ok(refine(&hyp, &reference, greedy))
}

/// Edit distance can never drop below the multiset difference, and shifts do
/// not change the multiset.
fn bag_lower_bound(hyp: &[u32], reference: &[u32]) -> usize {
    let mut balance: HashMap<u32, i64> = HashMap::new();
    for &w in hyp {
        *balance.entry(w).or_default() += 1;
    }
    for &w in reference {
        *balance.entry(w).or_default() -= 1;
    }
    let (surplus, deficit) = balance.values().fold((0, 0), |(s, d), &b| {
        if b > 0 {
            (s + b as usize, d)
        } else {
            (s, d + (-b) as usize)
        }
    });
    surplus.max(deficit)
}

fn refine(hyp: &[u32], reference: &[u32], mut best: TerEdits) -> TerEdits {
    let floor = bag_lower_bound(hyp, reference);
    let mut scratch = EditScratch::default();
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    seen.insert(hyp.to_vec());
    let mut frontier = vec![hyp.to_vec()];
    let mut depth = 0;
    let mut moved = Vec::with_capacity(hyp.len());

    'levels: while !frontier.is_empty() && depth + 1 + floor < best.total() {
        depth += 1;
        let mut next = Vec::new();
        for arrangement in &frontier {
            let n = arrangement.len();
            for start in 0..n {
                for len in 1..=MAX_SHIFT_SIZE.min(n - start) {
                    for dest in 0..=n - len {
                        if dest == start {
                            continue;
                        }
                        apply_shift(arrangement, start, len, dest, &mut moved);
                        if seen.contains(&moved) {
                            continue;
                        }
                        if seen.len() >= REFINE_BUDGET {
                            break 'levels;
                        }
                        seen.insert(moved.clone());
                        let dist = scratch.distance(&moved, reference);
                        if depth + dist < best.total() {
                            best = TerEdits {
                                shifts: depth,
                                edit_distance: dist,
                                reference_len: reference.len(),
                            };
                        }
                        next.push(moved.clone());
                    }
                }
            }
        }
        frontier = next;
    }
    best
}

fn greedy_shift_search(mut hyp: Vec<u32>, reference: &[u32]) -> TerEdits {
    let mut scratch = EditScratch::default();
    let mut current = scratch.distance(&hyp, reference);
    let mut shifts = 0;
    let mut candidate = Vec::with_capacity(hyp.len());

    while shifts < MAX_SHIFTS && current > 0 {
        let mut best: Option<ShiftChoice> = None;
        for (start, len) in matching_blocks(&hyp, reference) {
            for dest in 0..=hyp.len() - len {
                if dest == start {
                    continue;
                }
                apply_shift(&hyp, start, len, dest, &mut candidate);
                let dist = scratch.distance(&candidate, reference);
                if dist >= current {
                    continue;
                }
                let choice = ShiftChoice {
                    gain: current - dist,
                    len,
                    start,
                    dest,
                };
                if best.is_none_or(|b| choice.beats(&b)) {
                    best = Some(choice);
                }
            }
        }
        let Some(choice) = best else { break };
        apply_shift(&hyp, choice.start, choice.len, choice.dest, &mut candidate);
        std::mem::swap(&mut hyp, &mut candidate);
        current -= choice.gain;
        shifts += 1;
    }

    TerEdits {
        shifts,
        edit_distance: current,
        reference_len: reference.len(),
    }
}

#[derive(Clone, Copy, Debug)]
struct ShiftChoice {
    gain: usize,
    len: usize,
    start: usize,
    dest: usize,
}

impl ShiftChoice {
    // Largest gain, then longest block, then earliest block, then earliest destination.
    fn beats(&self, other: &ShiftChoice) -> bool {
        (self.gain, self.len, std::cmp::Reverse(self.start), std::cmp::Reverse(self.dest))
            > (other.gain, other.len, std::cmp::Reverse(other.start), std::cmp::Reverse(other.dest))
    }
}

/// Distinct hypothesis blocks `(start, len)` whose words also appear
/// contiguously in the reference.
fn matching_blocks(hyp: &[u32], reference: &[u32]) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    for start in 0..hyp.len() {
        for len in 1..=MAX_SHIFT_SIZE.min(hyp.len() - start) {
            let block = &hyp[start..start + len];
            if reference.windows(len).any(|w| w == block) {
                blocks.push((start, len));
            } else {
                // Longer blocks from this start cannot match either.
                break;
            }
        }
    }
    blocks
}

/// Writes `hyp` with `hyp[start..start+len]` removed and reinserted so that it
/// begins at index `dest` of the result.
fn apply_shift(hyp: &[u32], start: usize, len: usize, dest: usize, out: &mut Vec<u32>) {
    out.clear();
    let block = &hyp[start..start + len];
    let rest = hyp[..start].iter().chain(&hyp[start + len..]);
    for (i, &w) in rest.enumerate() {
        if i == dest {
            out.extend_from_slice(block);
        }
        out.push(w);
    }
    if out.len() < hyp.len() {
        out.extend_from_slice(block);
    }
}

#[derive(Default)]
struct EditScratch {
    prev: Vec<usize>,
    cur: Vec<usize>,
}

impl EditScratch {
    fn distance(&mut self, a: &[u32], b: &[u32]) -> usize {
        self.prev.clear();
        self.prev.extend(0..=b.len());
        self.cur.resize(b.len() + 1, 0);
        for (i, &x) in a.iter().enumerate() {
            self.cur[0] = i + 1;
            for (j, &y) in b.iter().enumerate() {
                let sub = self.prev[j] + usize::from(x != y);
                let del = self.prev[j + 1] + 1;
                let ins = self.cur[j] + 1;
                self.cur[j + 1] = sub.min(del).min(ins);
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
        }
        self.prev[b.len()]
    }
}

/// Plain word-level Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
