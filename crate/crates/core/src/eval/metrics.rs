//! Event-based micro-averaged precision, recall and F-score.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::events::Event;
use crate::error::Result;

const COLLAR_EPS: f64 = 1e-9;

/// Onset and offset tolerances of event matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collars {
    pub onset_s: f64,
    pub offset_min_s: f64,
    /// Offset collar as a fraction of the reference duration.
    pub offset_fraction: f64,
}

impl Default for Collars {
    fn default() -> Self {
        Self {
            onset_s: 0.2,
            offset_min_s: 0.2,
            offset_fraction: 0.5,
        }
    }
}

impl Collars {
    pub fn matches(&self, reference: &Event, detection: &Event) -> bool {
        let off_collar = self.offset_min_s.max(self.offset_fraction * reference.duration_s());
        (detection.onset_s - reference.onset_s).abs() <= self.onset_s + COLLAR_EPS
            && (detection.offset_s - reference.offset_s).abs() <= off_collar + COLLAR_EPS
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

fn by_onset(a: &&Event, b: &&Event) -> std::cmp::Ordering {
    a.onset_s
        .total_cmp(&b.onset_s)
        .then(a.offset_s.total_cmp(&b.offset_s))
}

/// Greedy one-to-one matching within each (file, keyword) group.
/// References are visited in onset order and each takes the
/// earliest-onset unmatched detection inside the collars.
pub fn match_events(refs: &[Event], dets: &[Event], collars: &Collars) -> Result<Counts> {
    let mut groups: BTreeMap<(&str, &str), (Vec<&Event>, Vec<&Event>)> = BTreeMap::new();
    for r in refs {
        r.validate()?;
        groups.entry((&r.file, &r.keyword)).or_default().0.push(r);
    }
    for d in dets {
        d.validate()?;
        groups.entry((&d.file, &d.keyword)).or_default().1.push(d);
    }
    let mut total = Counts::default();
    for (mut rs, mut ds) in groups.into_values() {
        rs.sort_by(by_onset);
        ds.sort_by(by_onset);
        let mut used = vec![false; ds.len()];
        let mut tp = 0;
        for r in &rs {
            if let Some(k) = (0..ds.len()).find(|&k| !used[k] && collars.matches(r, ds[k])) {
                used[k] = true;
                tp += 1;
            }
        }
        total += Counts {
            tp,
            fp: ds.len() - tp,
            fn_: rs.len() - tp,
        };
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and their harmonic mean from pooled counts. A task
/// with no references and no detections scores 1 on all three.
pub fn micro_f1(c: Counts) -> MetricsReport {
    let (precision, recall, f_score) = if c.tp + c.fp + c.fn_ == 0 {
        (1.0, 1.0, 1.0)
    } else {
        let p = ratio(c.tp, c.tp + c.fp);
        let r = ratio(c.tp, c.tp + c.fn_);
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        (p, r, f)
    };
    MetricsReport {
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        precision,
        recall,
        f_score,
    }
}
