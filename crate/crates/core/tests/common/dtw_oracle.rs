//! Exhaustive sub-sequence DTW by path enumeration.

use kws_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Backward steps in tie-break order: (1,1), (2,1), (1,2).
const BACK: [(usize, usize); 3] = [(1, 1), (2, 1), (1, 2)];

#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub acc_cost: f64,
    pub path_len: usize,
    pub start_col: usize,
}

/// Every path ending in `(m-1, end)` as (cells from start to end, backward
/// step indices).
fn paths(m: usize, end: usize) -> Vec<(Vec<(usize, usize)>, Vec<usize>)> {
    fn walk(
        i: usize,
        j: usize,
        cells: &mut Vec<(usize, usize)>,
        steps: &mut Vec<usize>,
        out: &mut Vec<(Vec<(usize, usize)>, Vec<usize>)>,
    ) {
        cells.push((i, j));
        if i == 0 {
            let mut fwd = cells.clone();
            fwd.reverse();
            out.push((fwd, steps.clone()));
        } else {
            for (k, &(di, dj)) in BACK.iter().enumerate() {
                if i >= di && j >= dj {
                    steps.push(k);
                    walk(i - di, j - dj, cells, steps, out);
                    steps.pop();
                }
            }
        }
        cells.pop();
    }
    let mut out = Vec::new();
    walk(m - 1, end, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// Minimum accumulated cost over all paths ending in `end`; among equal
/// costs the path whose backward step sequence is lexicographically
/// smallest in tie-break order wins.
pub fn brute_force(cost: &Matrix, end: usize) -> Option<Best> {
    let mut best: Option<(f64, Vec<usize>, usize, usize)> = None;
    for (cells, steps) in paths(cost.rows(), end) {
        let acc = cells.iter().fold(0.0, |a, &(i, j)| a + cost.get(i, j));
        let better = match &best {
            None => true,
            Some((b, bs, _, _)) => acc < *b || (acc == *b && steps < *bs),
        };
        if better {
            best = Some((acc, steps, cells.len(), cells[0].1));
        }
    }
    best.map(|(acc_cost, _, path_len, start_col)| Best {
        acc_cost,
        path_len,
        start_col,
    })
}

pub fn random_quantized(seed: u64, max_m: usize, max_n: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_n);
    let data = (0..m * n).map(|_| [0.0, 0.5, 1.0][rng.gen_range(0..3)]).collect();
    Matrix::from_vec(m, n, data).unwrap()
}

/// Number of seeds among `0..cases` on which the DP disagrees with the
/// oracle, plus the first disagreement.
pub fn disagreements(cases: u64) -> (usize, Option<String>) {
    let mut bad = 0;
    let mut first = None;
    for seed in 0..cases {
        let c = random_quantized(seed, 4, 5);
        let dp = kws_core::dtw::subsequence_dtw(&c);
        for end in 0..c.cols() {
            let got = dp[end].map(|p| Best {
                acc_cost: p.acc_cost,
                path_len: p.path_len,
                start_col: p.start_col,
            });
            let want = brute_force(&c, end);
            if got != want {
                bad += 1;
                first.get_or_insert(format!("seed {seed} end {end}: dp {got:?} oracle {want:?}"));
            }
        }
    }
    (bad, first)
}
