//! Turning path scores into non-overlapping keyword detections.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cost::cost_matrix_normalized;
use super::subseq::{subsequence_dtw, PathResult};
use super::template::Template;
use crate::error::{KwsError, Result};
use crate::matrix::{normalize_rows, Matrix};
use crate::par;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub keyword: String,
    pub onset_s: f64,
    pub offset_s: f64,
    pub score: f64,
}

impl Detection {
    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

/// Decision thresholds on the path score. A candidate is kept when its
/// score is strictly greater than the threshold of its keyword.
#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    Global(f64),
    PerKeyword(BTreeMap<String, f64>),
}

impl Thresholds {
    pub fn get(&self, keyword: &str) -> Result<f64> {
        match self {
            Thresholds::Global(t) => Ok(*t),
            Thresholds::PerKeyword(m) => m
                .get(keyword)
                .copied()
                .ok_or_else(|| KwsError::Config(format!("no threshold for keyword {keyword:?}"))),
        }
    }

    /// Fails unless every keyword has a threshold.
    pub fn check_covers<'a>(&self, keywords: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for k in keywords {
            self.get(k)?;
        }
        Ok(())
    }

    pub fn mode(&self) -> &'static str {
        match self {
            Thresholds::Global(_) => "global",
            Thresholds::PerKeyword(_) => "individual",
        }
    }
}

/// JSON numbers cannot hold infinities, so the sentinels travel as strings.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Level(f64);

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            v if v == f64::INFINITY => s.serialize_str("inf"),
            v if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            v => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Level(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(Level(f64::INFINITY)),
                "-inf" => Ok(Level(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("bad threshold {other:?}"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
enum ThresholdsRepr {
    Global { threshold: Level },
    Individual { thresholds: BTreeMap<String, Level> },
}

impl Serialize for Thresholds {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Thresholds::Global(t) => ThresholdsRepr::Global { threshold: Level(*t) },
            Thresholds::PerKeyword(m) => ThresholdsRepr::Individual {
                thresholds: m.iter().map(|(k, v)| (k.clone(), Level(*v))).collect(),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Thresholds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match ThresholdsRepr::deserialize(d)? {
            ThresholdsRepr::Global { threshold } => Thresholds::Global(threshold.0),
            ThresholdsRepr::Individual { thresholds } => {
                Thresholds::PerKeyword(thresholds.into_iter().map(|(k, v)| (k, v.0)).collect())
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Detections shorter than this fraction of their template's source
    /// duration are discarded.
    pub min_dur_fraction: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { min_dur_fraction: 0.5 }
    }
}

/// Path results of one template against one query, one per end column.
pub type TemplateTrack = Vec<Option<PathResult>>;

#[derive(Debug, Clone)]
struct Candidate {
    template: usize,
    score: f64,
    onset_s: f64,
    offset_s: f64,
}

/// Sub-sequence DTW of one template against a query. Both inputs must have
/// unit-norm rows.
pub fn match_template(template: &Matrix, query: &Matrix) -> Result<TemplateTrack> {
    Ok(subsequence_dtw(&cost_matrix_normalized(template, query)?))
}

/// Tracks of every template against one query; templates run in parallel.
pub fn match_all(templates: &[Template], query: &Matrix) -> Result<Vec<TemplateTrack>> {
    if query.rows() == 0 {
        return Ok(vec![Vec::new(); templates.len()]);
    }
    let q = normalize_rows(query, "query")?;
    par::map(templates, |t| {
        let tn = normalize_rows(&t.frames, "template")?;
        match_template(&tn, &q)
    })
    .into_iter()
    .collect()
}

/// Query time span covered by a path. The template's first frame lines up
/// with the keyword onset of its training sample and its last frame with
/// the sample's end, so the same offsets carry over to the query.
fn span_seconds(t: &Template, p: &PathResult, query_duration_s: f64) -> (f64, f64) {
    let hop = t.frame_hop_s;
    let onset = (p.start_col as f64 * hop).clamp(0.0, query_duration_s.max(0.0));
    let raw_off = t.source_duration_s + (p.end_col as f64 - (t.len() - 1) as f64) * hop;
    let offset = raw_off.min(query_duration_s).max(onset + hop);
    (onset, offset)
}

/// Maximal runs of consecutive reachable end columns that share a start
/// column, each reduced to its best-scoring (earliest on ties) column.
/// Grouping ignores the threshold, so a higher threshold only ever removes
/// representatives.
fn run_representatives(track: &[Option<PathResult>]) -> Vec<PathResult> {
    let mut out = Vec::new();
    let mut run: Option<PathResult> = None;
    for p in track {
        match (*p, run) {
            (Some(h), Some(r)) if h.start_col == r.start_col => {
                if h.score() > r.score() {
                    run = Some(h);
                }
            }
            (Some(h), _) => {
                out.extend(run);
                run = Some(h);
            }
            (None, _) => out.extend(run.take()),
        }
    }
    out.extend(run);
    out
}

/// Scores of all merged candidates; detections can only change when a
/// threshold crosses one of them.
pub fn candidate_scores(tracks: &[TemplateTrack]) -> Vec<f64> {
    tracks
        .iter()
        .flat_map(|t| run_representatives(t))
        .map(|p| p.score())
        .collect()
}

/// Sorted, disjoint claimed intervals.
#[derive(Default)]
struct Claimed(Vec<(f64, f64)>);

impl Claimed {
    /// Parts of `[a, b]` not yet claimed, ignoring slivers.
    fn free_parts(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut parts = Vec::new();
        let mut cursor = a;
        let first = self.0.partition_point(|&(_, hi)| hi <= a);
        for &(lo, hi) in &self.0[first..] {
            if lo >= b {
                break;
            }
            if lo - cursor > TIME_EPS {
                parts.push((cursor, lo));
            }
            cursor = cursor.max(hi);
        }
        if b - cursor > TIME_EPS {
            parts.push((cursor, b));
        }
        parts
    }

    fn insert(&mut self, a: f64, b: f64) {
        let i = self.0.partition_point(|&(lo, _)| lo < a);
        self.0.insert(i, (a, b));
    }
}

fn by_rank(a: &Candidate, b: &Candidate, templates: &[Template]) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.onset_s.total_cmp(&b.onset_s))
        .then_with(|| templates[a.template].keyword.cmp(&templates[b.template].keyword))
        .then(a.template.cmp(&b.template))
        .then(a.offset_s.total_cmp(&b.offset_s))
}

/// Detections from precomputed tracks (`tracks[i]` belongs to
/// `templates[i]`). Output is sorted by onset, then keyword.
pub fn detect_from_tracks(
    templates: &[Template],
    tracks: &[TemplateTrack],
    query_duration_s: f64,
    thresholds: &Thresholds,
    cfg: &DetectConfig,
) -> Result<Vec<Detection>> {
    if templates.len() != tracks.len() {
        return Err(KwsError::param("one track per template is required"));
    }
    thresholds.check_covers(templates.iter().map(|t| t.keyword.as_str()))?;

    let mut candidates = Vec::new();
    for (i, (t, track)) in templates.iter().zip(tracks).enumerate() {
        let thr = thresholds.get(&t.keyword)?;
        for p in run_representatives(track).into_iter().filter(|p| p.score() > thr) {
            let (onset_s, offset_s) = span_seconds(t, &p, query_duration_s);
            candidates.push(Candidate {
                template: i,
                score: p.score(),
                onset_s,
                offset_s,
            });
        }
    }
    candidates.sort_by(|a, b| by_rank(a, b, templates));

    let mut claimed = Claimed::default();
    let mut kept = Vec::new();
    for c in candidates {
        let parts = claimed.free_parts(c.onset_s, c.offset_s);
        if let [(a, b)] = parts[..] {
            claimed.insert(a, b);
            kept.push(Candidate {
                onset_s: a,
                offset_s: b,
                ..c
            });
        }
    }

    let mut out: Vec<Detection> = kept
        .into_iter()
        .filter(|c| {
            let t = &templates[c.template];
            c.offset_s - c.onset_s + TIME_EPS >= cfg.min_dur_fraction * t.source_duration_s
        })
        .map(|c| Detection {
            keyword: templates[c.template].keyword.clone(),
            onset_s: c.onset_s,
            offset_s: c.offset_s,
            score: c.score,
        })
        .collect();
    out.sort_by(|a, b| {
        a.onset_s
            .total_cmp(&b.onset_s)
            .then_with(|| a.keyword.cmp(&b.keyword))
    });
    Ok(out)
}

/// Matches every template against `query` and resolves the detections.
pub fn detect(
    templates: &[Template],
    query: &Matrix,
    query_duration_s: f64,
    thresholds: &Thresholds,
    cfg: &DetectConfig,
) -> Result<Vec<Detection>> {
    thresholds.check_covers(templates.iter().map(|t| t.keyword.as_str()))?;
    let tracks = match_all(templates, query)?;
    detect_from_tracks(templates, &tracks, query_duration_s, thresholds, cfg)
}
