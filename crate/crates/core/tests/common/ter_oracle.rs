//! Exhaustive TER oracle for short sequences: breadth-first search over every
//! arrangement reachable by block moves, minimising shifts + edit distance.

use std::collections::HashSet;

pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn moves(s: &[u8], max_block: usize) -> Vec<Vec<u8>> {
    let n = s.len();
    let mut out = Vec::new();
    for start in 0..n {
        for len in 1..=max_block.min(n - start) {
            let block = &s[start..start + len];
            let mut rest: Vec<u8> = s[..start].to_vec();
            rest.extend_from_slice(&s[start + len..]);
            for dest in 0..=rest.len() {
                if dest == start {
                    continue;
                }
                let mut t = rest[..dest].to_vec();
                t.extend_from_slice(block);
                t.extend_from_slice(&rest[dest..]);
                out.push(t);
            }
        }
    }
    out
}

/// Minimum over all shift sequences of (#shifts + edit distance).
pub fn exhaustive_ter_edits(hyp: &[u8], reference: &[u8], max_block: usize) -> usize {
    let floor = hyp.len().abs_diff(reference.len());
    let mut best = levenshtein(hyp, reference);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(hyp.to_vec());
    let mut frontier = vec![hyp.to_vec()];
    let mut depth = 0;
    while !frontier.is_empty() && depth + 1 + floor < best {
        depth += 1;
        let mut next = Vec::new();
        for s in &frontier {
            for t in moves(s, max_block) {
                if seen.insert(t.clone()) {
                    best = best.min(depth + levenshtein(&t, reference));
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    best
}
