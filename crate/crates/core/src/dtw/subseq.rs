//! Sub-sequence DTW with step sizes (2,1), (1,1) and (1,2).
//!
//! Rows index template frames, columns index query frames. Row 0 may start
//! at any column. For each end column the result carries the accumulated
//! cost, the number of path cells and the start column of the path found by
//! backtracking from the last row. When several predecessors attain the
//! minimum, (1,1) is preferred over (2,1) over (1,2).

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// A step as (template increment, query increment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Diagonal,
    TemplateTwo,
    QueryTwo,
}

impl Step {
    /// Steps in tie-break order.
    pub const ALL: [Step; 3] = [Step::Diagonal, Step::TemplateTwo, Step::QueryTwo];

    pub fn delta(self) -> (usize, usize) {
        match self {
            Step::Diagonal => (1, 1),
            Step::TemplateTwo => (2, 1),
            Step::QueryTwo => (1, 2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub end_col: usize,
    pub start_col: usize,
    pub acc_cost: f64,
    /// Number of matrix cells on the path.
    pub path_len: usize,
}

impl PathResult {
    /// Length-normalized score; higher is better.
    pub fn score(&self) -> f64 {
        -self.acc_cost / self.path_len as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    acc: f64,
    start: usize,
    len: usize,
}

const UNREACHABLE: Cell = Cell {
    acc: f64::INFINITY,
    start: usize::MAX,
    len: 0,
};

#[inline]
fn relax(preds: [Option<Cell>; 3], cost: f64) -> Cell {
    let mut best: Option<Cell> = None;
    for p in preds.into_iter().flatten() {
        if p.acc.is_finite() && best.map_or(true, |b| p.acc < b.acc) {
            best = Some(p);
        }
    }
    match best {
        Some(b) => Cell {
            acc: b.acc + cost,
            start: b.start,
            len: b.len + 1,
        },
        None => UNREACHABLE,
    }
}

fn finish(last: &[Cell]) -> Vec<Option<PathResult>> {
    last.iter()
        .enumerate()
        .map(|(j, c)| {
            c.acc.is_finite().then_some(PathResult {
                end_col: j,
                start_col: c.start,
                acc_cost: c.acc,
                path_len: c.len,
            })
        })
        .collect()
}

/// Column-by-column reference sweep; memory is three template columns.
pub fn subsequence_dtw(cost: &Matrix) -> Vec<Option<PathResult>> {
    let (m, n) = cost.shape();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let mut prev2 = vec![UNREACHABLE; m];
    let mut prev1 = vec![UNREACHABLE; m];
    let mut cur = vec![UNREACHABLE; m];
    let mut last = Vec::with_capacity(n);
    for j in 0..n {
        cur[0] = Cell {
            acc: cost.get(0, j),
            start: j,
            len: 1,
        };
        for i in 1..m {
            let diag = (j >= 1).then(|| prev1[i - 1]);
            let two_t = (j >= 1 && i >= 2).then(|| prev1[i - 2]);
            let two_q = (j >= 2).then(|| prev2[i - 1]);
            cur[i] = relax([diag, two_t, two_q], cost.get(i, j));
        }
        last.push(cur[m - 1]);
        std::mem::swap(&mut prev2, &mut prev1);
        std::mem::swap(&mut prev1, &mut cur);
    }
    finish(&last)
}

/// Row-by-row sweep. Every step advances the template index, so each row
/// only reads the two rows above it and its columns are independent; they
/// are evaluated in parallel. Results are bit-identical to
/// [`subsequence_dtw`].
pub fn subsequence_dtw_rows(cost: &Matrix) -> Vec<Option<PathResult>> {
    let (m, n) = cost.shape();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let mut above2 = vec![UNREACHABLE; n];
    let mut above1: Vec<Cell> = (0..n)
        .map(|j| Cell {
            acc: cost.get(0, j),
            start: j,
            len: 1,
        })
        .collect();
    for i in 1..m {
        let row = cost.row(i);
        let (a1, a2) = (&above1, &above2);
        let next = crate::par::map_range(n, |j| {
            let diag = (j >= 1).then(|| a1[j - 1]);
            let two_t = (j >= 1 && i >= 2).then(|| a2[j - 1]);
            let two_q = (j >= 2).then(|| a1[j - 2]);
            relax([diag, two_t, two_q], row[j])
        });
        above2 = std::mem::replace(&mut above1, next);
    }
    finish(&above1)
}

/// Classic DTW pinned to `(0, 0)` and `(M-1, N-1)` with the same step set.
/// Returns `None` when the corner is unreachable.
pub fn fixed_endpoint_dtw(cost: &Matrix) -> Option<f64> {
    let (m, n) = cost.shape();
    if m == 0 || n == 0 {
        return None;
    }
    let mut d = vec![f64::INFINITY; m * n];
    d[0] = cost.get(0, 0);
    for j in 0..n {
        for i in 0..m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for s in Step::ALL {
                let (di, dj) = s.delta();
                if i >= di && j >= dj {
                    best = best.min(d[(i - di) * n + j - dj]);
                }
            }
            d[i * n + j] = best + cost.get(i, j);
        }
    }
    let v = d[m * n - 1];
    v.is_finite().then_some(v)
}
