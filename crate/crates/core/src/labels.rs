//! Keyword and relative-position training targets.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};
use crate::matrix::Matrix;

/// Class layout: base keywords first, then one reversed class per keyword
/// (when enabled), then the single no-speech class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordLabelSpace {
    keywords: Vec<String>,
    reversed: bool,
}

pub const NO_SPEECH: &str = "<no_speech>";
const REVERSED_SUFFIX: &str = "~reversed";

impl KeywordLabelSpace {
    pub fn new(keywords: Vec<String>, reversed: bool) -> Result<Self> {
        if keywords.is_empty() {
            return Err(KwsError::param("label space needs at least one keyword"));
        }
        let mut seen = HashSet::new();
        for k in &keywords {
            if !seen.insert(k.as_str()) {
                return Err(KwsError::param(format!("duplicate keyword {k:?}")));
            }
            if k == NO_SPEECH || k.ends_with(REVERSED_SUFFIX) {
                return Err(KwsError::param(format!("reserved keyword name {k:?}")));
            }
        }
        Ok(Self { keywords, reversed })
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn has_reversed(&self) -> bool {
        self.reversed
    }

    pub fn n_base(&self) -> usize {
        self.keywords.len()
    }

    pub fn n_kw(&self) -> usize {
        if self.reversed {
            2 * self.n_base() + 1
        } else {
            self.n_base() + 1
        }
    }

    pub fn keyword_index(&self, name: &str) -> Option<usize> {
        self.keywords.iter().position(|k| k == name)
    }

    pub fn reversed_class(&self, keyword: usize) -> Option<usize> {
        (self.reversed && keyword < self.n_base()).then(|| self.n_base() + keyword)
    }

    pub fn no_speech_class(&self) -> usize {
        self.n_kw() - 1
    }

    pub fn is_base_keyword(&self, class: usize) -> bool {
        class < self.n_base()
    }

    pub fn class_name(&self, class: usize) -> String {
        let n = self.n_base();
        if class < n {
            self.keywords[class].clone()
        } else if class == self.no_speech_class() {
            NO_SPEECH.to_owned()
        } else {
            format!("{}{REVERSED_SUFFIX}", self.keywords[class - n])
        }
    }

    pub fn one_hot(&self, class: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.n_kw()];
        y[class] = 1.0;
        y
    }
}

/// 1-based inclusive interval of active position classes for segment
/// `i_seg` (1-based) of a sample split into `n_seg` segments.
pub fn active_interval(n_seg: usize, i_seg: usize, n_pos: usize) -> Result<(usize, usize)> {
    if n_seg == 0 || i_seg == 0 || i_seg > n_seg {
        return Err(KwsError::param(format!(
            "segment index {i_seg} outside 1..={n_seg}"
        )));
    }
    if n_seg > n_pos {
        return Err(KwsError::param(format!(
            "sample has {n_seg} segments but only {n_pos} position classes exist"
        )));
    }
    let lo = 1 + ((i_seg - 1) * n_pos).div_ceil(n_seg);
    let hi = (i_seg * n_pos).div_ceil(n_seg);
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionSpec {
    /// 1-based inclusive interval.
    Interval(usize, usize),
    /// Reversed and no-speech segments carry no position information.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionalLabel {
    pub weights: Vec<f64>,
}

impl PositionalLabel {
    pub fn n_pos(&self) -> usize {
        self.weights.len()
    }
}

pub fn positional_label(spec: PositionSpec, n_pos: usize) -> Result<PositionalLabel> {
    if n_pos == 0 {
        return Err(KwsError::param("n_pos must be positive"));
    }
    let (lo, hi) = match spec {
        PositionSpec::Uniform => (1, n_pos),
        PositionSpec::Interval(lo, hi) => {
            if lo == 0 || lo > hi || hi > n_pos {
                return Err(KwsError::param(format!(
                    "position interval [{lo}, {hi}] is empty or outside 1..={n_pos}"
                )));
            }
            (lo, hi)
        }
    };
    let w = 1.0 / (hi - lo + 1) as f64;
    let weights = (1..=n_pos)
        .map(|p| if (lo..=hi).contains(&p) { w } else { 0.0 })
        .collect();
    Ok(PositionalLabel { weights })
}

/// Training target of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub y_kw: Vec<f64>,
    pub y_pos: PositionalLabel,
    /// Training sample the segment came from; losses average per sample.
    pub sample_id: usize,
    /// 1-based position of the segment inside its sample.
    pub segment_index: usize,
    pub n_seg: usize,
}

impl SegmentLabel {
    /// Linear mix of two labels; both heads share the coefficient.
    pub fn mixup(&self, other: &SegmentLabel, lambda: f64) -> SegmentLabel {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
                .collect()
        };
        SegmentLabel {
            y_kw: mix(&self.y_kw, &other.y_kw),
            y_pos: PositionalLabel {
                weights: mix(&self.y_pos.weights, &other.y_pos.weights),
            },
            ..self.clone()
        }
    }
}

/// Feature frames of one segment with its target and hard class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub features: Matrix,
    pub label: SegmentLabel,
    pub class: usize,
}

/// `N_pos`: the largest segment count of any training sample.
pub fn n_pos_from_counts(segment_counts: impl IntoIterator<Item = usize>) -> Result<usize> {
    segment_counts
        .into_iter()
        .max()
        .filter(|&m| m > 0)
        .ok_or_else(|| KwsError::param("no training samples"))
}

/// Labels for every segment of one keyword sample.
pub fn keyword_sample_labels(
    space: &KeywordLabelSpace,
    keyword: usize,
    n_seg: usize,
    n_pos: usize,
    sample_id: usize,
) -> Result<Vec<SegmentLabel>> {
    if !space.is_base_keyword(keyword) {
        return Err(KwsError::param(format!("class {keyword} is not a base keyword")));
    }
    (1..=n_seg)
        .map(|i| {
            let (lo, hi) = active_interval(n_seg, i, n_pos)?;
            Ok(SegmentLabel {
                y_kw: space.one_hot(keyword),
                y_pos: positional_label(PositionSpec::Interval(lo, hi), n_pos)?,
                sample_id,
                segment_index: i,
                n_seg,
            })
        })
        .collect()
}

pub fn no_speech_label(space: &KeywordLabelSpace, n_pos: usize, sample_id: usize) -> Result<SegmentLabel> {
    Ok(SegmentLabel {
        y_kw: space.one_hot(space.no_speech_class()),
        y_pos: positional_label(PositionSpec::Uniform, n_pos)?,
        sample_id,
        segment_index: 1,
        n_seg: 1,
    })
}

/// Appends a time-reversed copy of every keyword segment, labeled with the
/// keyword's reversed class and a uniform position. No-speech and already
/// reversed segments are not copied. Reversed copies get fresh sample ids
/// (`original + offset`) so each reversed sample averages on its own.
pub fn augment_reversed(
    segments: Vec<LabeledSegment>,
    space: &KeywordLabelSpace,
) -> Result<Vec<LabeledSegment>> {
    if !space.has_reversed() {
        return Err(KwsError::param(
            "label space was built without reversed classes",
        ));
    }
    let offset = segments.iter().map(|s| s.label.sample_id + 1).max().unwrap_or(0);
    let mut extra = Vec::new();
    for s in &segments {
        if !space.is_base_keyword(s.class) {
            continue;
        }
        let class = space.reversed_class(s.class).expect("reversal enabled");
        extra.push(LabeledSegment {
            features: s.features.reversed_rows(),
            label: SegmentLabel {
                y_kw: space.one_hot(class),
                y_pos: positional_label(PositionSpec::Uniform, s.label.y_pos.n_pos())?,
                sample_id: s.label.sample_id + offset,
                segment_index: s.label.n_seg + 1 - s.label.segment_index,
                n_seg: s.label.n_seg,
            },
            class,
        });
    }
    let mut out = segments;
    out.extend(extra);
    Ok(out)
}

/// Random oversampling plan: every original index once, plus uniformly drawn
/// duplicates until each class has as many entries as the largest one.
pub fn oversample_plan<R: Rng>(classes: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    if classes.is_empty() {
        return Err(KwsError::param("cannot oversample an empty corpus"));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in classes.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut plan: Vec<usize> = (0..classes.len()).collect();
    for members in by_class.values() {
        for _ in members.len()..target {
            plan.push(members[rng.gen_range(0..members.len())]);
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("kw{i}")).collect()
    }

    #[test]
    fn interval_examples() {
        assert_eq!(active_interval(5, 2, 10).unwrap(), (3, 4));
        assert_eq!(active_interval(4, 3, 4).unwrap(), (3, 3));
        assert_eq!(active_interval(3, 1, 10).unwrap(), (1, 4));
    }

    #[test]
    fn interval_errors() {
        assert!(active_interval(5, 0, 10).is_err());
        assert!(active_interval(5, 6, 10).is_err());
        assert!(active_interval(11, 1, 10).is_err());
    }

    #[test]
    fn positional_label_examples() {
        let l = positional_label(PositionSpec::Interval(3, 4), 10).unwrap();
        assert_eq!(l.weights[2], 0.5);
        assert_eq!(l.weights[3], 0.5);
        assert_eq!(l.weights.iter().filter(|&&w| w == 0.0).count(), 8);

        let one = positional_label(PositionSpec::Interval(7, 7), 10).unwrap();
        assert_eq!(one.weights[6], 1.0);

        let u = positional_label(PositionSpec::Uniform, 8).unwrap();
        assert!(u.weights.iter().all(|&w| w == 0.125));

        assert!(positional_label(PositionSpec::Interval(4, 3), 10).is_err());
        assert!(positional_label(PositionSpec::Interval(0, 3), 10).is_err());
        assert!(positional_label(PositionSpec::Interval(9, 11), 10).is_err());
    }

    #[test]
    fn label_space_sizes() {
        let s = KeywordLabelSpace::new(names(15), true).unwrap();
        assert_eq!(s.n_kw(), 31);
        assert_eq!(s.reversed_class(2), Some(17));
        assert_eq!(s.class_name(17), "kw2~reversed");
        assert_eq!(s.class_name(30), NO_SPEECH);
        let plain = KeywordLabelSpace::new(names(15), false).unwrap();
        assert_eq!(plain.n_kw(), 16);
        assert_eq!(plain.reversed_class(2), None);
        assert!(KeywordLabelSpace::new(vec!["a".into(), "a".into()], true).is_err());
    }

    fn corpus(space: &KeywordLabelSpace) -> Vec<LabeledSegment> {
        let mut out = Vec::new();
        for (sample, (kw, n_seg)) in [(0usize, 3usize), (1, 2)].into_iter().enumerate() {
            for label in keyword_sample_labels(space, kw, n_seg, 4, sample).unwrap() {
                let i = label.segment_index as f64;
                out.push(LabeledSegment {
                    features: Matrix::from_rows(&[vec![i, 0.0], vec![0.0, i], vec![i, i]]).unwrap(),
                    label,
                    class: kw,
                });
            }
        }
        out.push(LabeledSegment {
            features: Matrix::filled(3, 2, 0.1),
            label: no_speech_label(space, 4, 9).unwrap(),
            class: space.no_speech_class(),
        });
        out
    }

    #[test]
    fn reversal_doubles_keyword_segments_only() {
        let space = KeywordLabelSpace::new(names(2), true).unwrap();
        let base = corpus(&space);
        let aug = augment_reversed(base.clone(), &space).unwrap();
        assert_eq!(aug[..base.len()], base[..]);
        let count = |v: &[LabeledSegment], f: &dyn Fn(usize) -> bool| {
            v.iter().filter(|s| f(s.class)).count()
        };
        let kw = |c| space.is_base_keyword(c);
        let rev = |c: usize| c >= 2 && c < 4;
        let ns = |c| c == space.no_speech_class();
        assert_eq!(count(&aug, &kw), count(&base, &kw));
        assert_eq!(count(&aug, &rev), count(&base, &kw));
        assert_eq!(count(&aug, &ns), count(&base, &ns));
        for (orig, copy) in base.iter().zip(&aug[base.len()..]) {
            assert_eq!(copy.features.reversed_rows(), orig.features);
            assert_eq!(copy.class, space.reversed_class(orig.class).unwrap());
            assert!(copy.label.y_pos.weights.iter().all(|&w| w == 0.25));
            assert_ne!(copy.label.sample_id, orig.label.sample_id);
        }
        let plain = KeywordLabelSpace::new(names(2), false).unwrap();
        assert!(augment_reversed(base, &plain).is_err());
    }

    #[test]
    fn oversample_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(oversample_plan(&[0, 0, 0, 1, 1, 1], &mut rng).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(oversample_plan(&[4, 4], &mut rng).unwrap(), vec![0, 1]);
        let plan = oversample_plan(&[0, 0, 1, 1, 1, 1], &mut rng).unwrap();
        assert_eq!(plan.iter().filter(|&&i| i < 2).count(), 4);
        assert!(oversample_plan(&[], &mut rng).is_err());
    }

    #[test]
    fn mixup_mixes_both_heads() {
        let space = KeywordLabelSpace::new(names(2), false).unwrap();
        let a = keyword_sample_labels(&space, 0, 2, 2, 0).unwrap().remove(0);
        let b = keyword_sample_labels(&space, 1, 2, 2, 1).unwrap().remove(1);
        let m = a.mixup(&b, 0.25);
        assert_eq!(m.y_kw, vec![0.25, 0.75, 0.0]);
        assert_eq!(m.y_pos.weights, vec![0.25, 0.75]);
    }

    #[test]
    fn positional_partition_exhaustive() {
        for n_pos in 1..=64 {
            for n_seg in 1..=n_pos {
                let mut covered = vec![0u32; n_pos + 1];
                let mut prev_hi = 0;
                for i in 1..=n_seg {
                    let (lo, hi) = active_interval(n_seg, i, n_pos).unwrap();
                    assert!(lo <= hi && lo == prev_hi + 1);
                    prev_hi = hi;
                    (lo..=hi).for_each(|p| covered[p] += 1);
                    let l = positional_label(PositionSpec::Interval(lo, hi), n_pos).unwrap();
                    assert!((l.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                }
                assert!(covered[1..].iter().all(|&c| c == 1));
            }
        }
    }

    proptest! {
        #[test]
        fn oversample_balances(classes in proptest::collection::vec(0usize..5, 1..60), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = oversample_plan(&classes, &mut rng).unwrap();
            let mut counts = BTreeMap::new();
            for &i in &plan { *counts.entry(classes[i]).or_insert(0usize) += 1; }
            let first = *counts.values().next().unwrap();
            prop_assert!(counts.values().all(|&c| c == first));
            for i in 0..classes.len() { prop_assert!(plan.contains(&i)); }
        }
    }
}
