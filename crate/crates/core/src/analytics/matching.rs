//! Label-permutation-invariant accuracy for comparing learned kinemes with
//! planted ground truth.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedAccuracy {
    pub accuracy: f64,
    /// `mapping[learned - 1]` is the planted symbol it was matched to (1-based).
    pub mapping: Vec<usize>,
    pub evaluated: usize,
}

/// Best one-to-one relabelling of `predicted` onto `truth` (both 1-based in
/// `1..=k`). Entries with no ground truth are skipped.
pub fn matched_accuracy(predicted: &[usize], truth: &[Option<usize>], k: usize) -> Result<MatchedAccuracy> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: truth.len() });
    }
    let mut counts = vec![vec![0i64; k]; k];
    let mut evaluated = 0;
    for (&p, t) in predicted.iter().zip(truth) {
        let Some(t) = *t else { continue };
        for s in [p, t] {
            if s == 0 || s > k {
                return Err(Error::SymbolOutOfRange { symbol: s, k });
            }
        }
        counts[p - 1][t - 1] += 1;
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::EmptyInput);
    }
    let assignment = max_weight_assignment(&counts);
    let hits: i64 = assignment.iter().enumerate().map(|(r, &c)| counts[r][c]).sum();
    Ok(MatchedAccuracy {
        accuracy: hits as f64 / evaluated as f64,
        mapping: assignment.into_iter().map(|t| t + 1).collect(),
        evaluated,
    })
}

/// Maximum-weight perfect assignment on a square matrix (Hungarian method,
/// O(n³)). Returns the column assigned to each row.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> Vec<usize> {
    let n = weights.len();
    // minimise negated weights; rows and columns are 1-based internally
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
