//! Validation-set threshold search.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{micro_f1, Counts, MetricsReport};
use crate::dtw::Thresholds;
use crate::error::Result;

/// Largest number of grid points evaluated in one sweep.
pub const GRID_CAP: usize = 1024;
const MAX_PASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Global,
    Individual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub thresholds: Thresholds,
    pub report: MetricsReport,
    /// Number of threshold settings evaluated.
    pub evaluations: usize,
}

fn distinct_sorted(scores: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = scores.into_iter().filter(|s| s.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn subsample(sorted: &[f64], cap: usize) -> Vec<f64> {
    if sorted.len() <= cap {
        return sorted.to_vec();
    }
    let n = sorted.len() - 1;
    let mut picked: Vec<f64> = (0..cap).map(|k| sorted[k * n / (cap - 1)]).collect();
    picked.dedup();
    picked
}

/// Midpoints of consecutive distinct scores plus both infinities, in
/// ascending order. Above `cap` distinct scores, evenly spaced order
/// statistics stand in for the full set.
pub fn threshold_grid(scores: &[f64], cap: usize) -> Vec<f64> {
    let s = subsample(&distinct_sorted(scores.iter().copied()), cap.max(2));
    let mut grid = Vec::with_capacity(s.len() + 1);
    grid.push(f64::NEG_INFINITY);
    grid.extend(s.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    grid.push(f64::INFINITY);
    grid
}

/// `(f, t)` beats the incumbent on higher F, or equal F and a higher
/// threshold.
fn better(f: f64, t: f64, best: Option<(f64, f64)>) -> bool {
    best.map_or(true, |(bf, bt)| f > bf || (f == bf && t > bt))
}

/// Maximizes `objective` over the grid of `sorted` scores. When the grid
/// was subsampled, the bracket around the winner is searched again until
/// it holds few enough scores to be exhaustive.
fn search_1d(
    sorted: &[f64],
    extra: Option<f64>,
    mut objective: impl FnMut(f64) -> Result<f64>,
    evaluations: &mut usize,
) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |t: f64, best: &mut Option<(f64, f64)>| -> Result<()> {
        *evaluations += 1;
        let f = objective(t)?;
        if better(f, t, *best) {
            *best = Some((f, t));
        }
        Ok(())
    };
    if let Some(t) = extra {
        consider(t, &mut best)?;
    }
    let mut window = sorted.to_vec();
    loop {
        let grid = threshold_grid(&window, GRID_CAP);
        for &t in &grid {
            consider(t, &mut best)?;
        }
        if window.len() <= GRID_CAP {
            break;
        }
        let (_, bt) = best.expect("grid is never empty");
        let k = grid.partition_point(|&g| g < bt);
        let lo = if k == 0 { f64::NEG_INFINITY } else { grid[k - 1] };
        let hi = grid.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let inner: Vec<f64> = window.iter().copied().filter(|&s| s > lo && s < hi).collect();
        if inner.len() >= window.len() {
            break;
        }
        window = inner;
    }
    Ok(best.map(|(f, t)| (t, f)).expect("grid is never empty"))
}

/// Chooses thresholds maximizing the F-score returned by `evaluate`.
///
/// `scores` are the candidate scores per keyword; detections only change
/// when a threshold crosses one of them. Global mode searches a single
/// value. Individual mode starts from the global optimum and then improves
/// one keyword at a time with all others fixed, so its F is never below
/// the global one.
pub fn tune_thresholds<F>(
    mode: ThresholdMode,
    keywords: &[String],
    scores: &BTreeMap<String, Vec<f64>>,
    evaluate: F,
) -> Result<TuneResult>
where
    F: Fn(&Thresholds) -> Result<Counts>,
{
    let mut evaluations = 0;
    let f_of = |th: &Thresholds| -> Result<f64> { Ok(micro_f1(evaluate(th)?).f_score) };

    let all = distinct_sorted(scores.values().flatten().copied());
    if all.is_empty() {
        log::warn!("no candidate scores to tune on; thresholds set to +inf");
        let thresholds = match mode {
            ThresholdMode::Global => Thresholds::Global(f64::INFINITY),
            ThresholdMode::Individual => {
                Thresholds::PerKeyword(keywords.iter().map(|k| (k.clone(), f64::INFINITY)).collect())
            }
        };
        let report = micro_f1(evaluate(&thresholds)?);
        return Ok(TuneResult {
            thresholds,
            report,
            evaluations: 1,
        });
    }

    let (t_global, f_global) = search_1d(&all, None, |t| f_of(&Thresholds::Global(t)), &mut evaluations)?;
    let thresholds = match mode {
        ThresholdMode::Global => Thresholds::Global(t_global),
        ThresholdMode::Individual => {
            let mut current: BTreeMap<String, f64> =
                keywords.iter().map(|k| (k.clone(), t_global)).collect();
            let mut f_current = f_global;
            for pass in 0..MAX_PASSES {
                let before = f_current;
                for k in keywords {
                    let own = distinct_sorted(scores.get(k).into_iter().flatten().copied());
                    let base = current.clone();
                    let (t, f) = search_1d(
                        &own,
                        Some(current[k]),
                        |t| {
                            let mut m = base.clone();
                            m.insert(k.clone(), t);
                            f_of(&Thresholds::PerKeyword(m))
                        },
                        &mut evaluations,
                    )?;
                    current.insert(k.clone(), t);
                    f_current = f;
                }
                log::debug!("per-keyword pass {pass}: F {f_current:.4}");
                if f_current <= before {
                    break;
                }
            }
            Thresholds::PerKeyword(current)
        }
    };
    let report = micro_f1(evaluate(&thresholds)?);
    Ok(TuneResult {
        thresholds,
        report,
        evaluations: evaluations + 1,
    })
}
