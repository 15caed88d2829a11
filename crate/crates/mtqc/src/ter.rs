//! Translation edit rate: word edit distance plus greedy block shifts.
//!
//! `ter` counts the minimum insertions, deletions and substitutions to turn
//! a hypothesis into a reference, augmented with block moves found by a
//! greedy search. Each applied shift costs one edit and the total is
//! normalized by the reference length. `hter` scores machine output against
//! its human post-edit, which is where the corpus labels come from.

#![allow(clippy::needless_range_loop)]

use crate::error::{QcError, Result};

/// Longest hypothesis span the shift search will consider moving.
pub const MAX_BLOCK_LEN: usize = 10;

/// Insert/delete/substitute counts for one optimal alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditBreakdown {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
}

impl EditBreakdown {
    pub fn total(&self) -> usize {
        self.insertions + self.deletions + self.substitutions
    }
}

/// Full edit-rate result for one hypothesis/reference pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerResult {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub shifts: usize,
    pub ref_len: usize,
    pub score: f64,
}

impl TerResult {
    pub fn total_edits(&self) -> usize {
        self.insertions + self.deletions + self.substitutions + self.shifts
    }
}

/// Word-level Levenshtein distance with unit costs.
///
/// The breakdown reports one optimal alignment. Ties are broken the same way
/// every time: substitution over an insert+delete pair, then deletion over
/// insertion, so identical inputs always produce identical counts.
pub fn edit_distance<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Result<(usize, EditBreakdown)> {
    if reference.is_empty() {
        return Err(QcError::EmptyReference);
    }
    let n = hyp.len();
    let m = reference.len();

    // dist[i][j]: edits to turn hyp[..i] into reference[..j].
    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dist[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            if hyp[i - 1].as_ref() == reference[j - 1].as_ref() {
                dist[i][j] = dist[i - 1][j - 1];
            } else {
                let sub = dist[i - 1][j - 1] + 1;
                let del = dist[i - 1][j] + 1;
                let ins = dist[i][j - 1] + 1;
                dist[i][j] = sub.min(del).min(ins);
            }
        }
    }

    // Backtrace with the fixed preference order: match, substitution,
    // deletion, insertion.
    let mut breakdown = EditBreakdown::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0
            && j > 0
            && hyp[i - 1].as_ref() == reference[j - 1].as_ref()
            && dist[i][j] == dist[i - 1][j - 1]
        {
            i -= 1;
            j -= 1;
            continue;
        }
        if i > 0 && j > 0 && dist[i][j] == dist[i - 1][j - 1] + 1 {
            breakdown.substitutions += 1;
            i -= 1;
            j -= 1;
        } else if i > 0 && dist[i][j] == dist[i - 1][j] + 1 {
            breakdown.deletions += 1;
            i -= 1;
        } else {
            breakdown.insertions += 1;
            j -= 1;
        }
    }
    debug_assert_eq!(breakdown.total(), dist[n][m]);
    Ok((dist[n][m], breakdown))
}

/// One legal block move: take `len` tokens starting at `start` and re-insert
/// them so the span lines up with an identical span of the reference
/// starting at `ref_pos`.
fn apply_shift(hyp: &[String], start: usize, len: usize, ref_pos: usize) -> Vec<String> {
    let mut rest: Vec<String> = Vec::with_capacity(hyp.len());
    rest.extend_from_slice(&hyp[..start]);
    rest.extend_from_slice(&hyp[start + len..]);
    let insert_at = ref_pos.min(rest.len());
    let mut out = Vec::with_capacity(hyp.len());
    out.extend_from_slice(&rest[..insert_at]);
    out.extend_from_slice(&hyp[start..start + len]);
    out.extend_from_slice(&rest[insert_at..]);
    out
}

/// Translation edit rate with the greedy shift loop.
///
/// Repeatedly applies the block move that most reduces the remaining edit
/// distance, charging one edit per move, and stops as soon as no move
/// strictly reduces the running total. Ties go to the shortest block, then
/// the leftmost origin, then the leftmost reference position.
pub fn ter<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Result<TerResult> {
    if reference.is_empty() {
        return Err(QcError::EmptyReference);
    }
    let reference: Vec<String> = reference.iter().map(|t| t.as_ref().to_string()).collect();
    let mut current: Vec<String> = hyp.iter().map(|t| t.as_ref().to_string()).collect();

    let (mut remaining, _) = edit_distance(&current, &reference)?;
    let mut shifts = 0usize;

    loop {
        let mut best: Option<(usize, Vec<String>)> = None;
        // Candidate order fixes the tie-break: shortest block first, then
        // leftmost origin, then leftmost reference position; a strict `<`
        // against the incumbent keeps the first minimum. Blocks longer than
        // the reference cannot match it anywhere.
        let max_len = current.len().min(reference.len()).min(MAX_BLOCK_LEN);
        for len in 1..=max_len {
            for start in 0..=current.len() - len {
                let block = &current[start..start + len];
                for ref_pos in 0..=reference.len().saturating_sub(len) {
                    if reference[ref_pos..ref_pos + len] != *block {
                        continue;
                    }
                    let candidate = apply_shift(&current, start, len, ref_pos);
                    if candidate == current {
                        continue;
                    }
                    let (dist, _) = edit_distance(&candidate, &reference)?;
                    // The move must pay for itself: one shift plus the new
                    // distance has to beat the current distance.
                    if dist + 1 >= remaining {
                        continue;
                    }
                    if best.as_ref().is_none_or(|(b, _)| dist < *b) {
                        best = Some((dist, candidate));
                    }
                }
            }
        }
        match best {
            Some((dist, candidate)) => {
                shifts += 1;
                remaining = dist;
                current = candidate;
            }
            None => break,
        }
    }

    let (_, breakdown) = edit_distance(&current, &reference)?;
    let total = breakdown.total() + shifts;
    Ok(TerResult {
        insertions: breakdown.insertions,
        deletions: breakdown.deletions,
        substitutions: breakdown.substitutions,
        shifts,
        ref_len: reference.len(),
        score: total as f64 / reference.len() as f64,
    })
}

/// Human-targeted TER: the post-edit plays the reference role.
pub fn hter<S: AsRef<str>>(mt: &[S], post_edit: &[S]) -> Result<f64> {
    Ok(ter(mt, post_edit)?.score)
}
