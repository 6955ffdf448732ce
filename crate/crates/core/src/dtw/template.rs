//! DTW templates assembled from overlapping segment embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};
use crate::matrix::{norm, Matrix};

/// Frame matrix of one enrolled training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub frames: Matrix,
    pub keyword: String,
    pub source_duration_s: f64,
    pub frame_hop_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TemplateMeta {
    pub keyword: String,
    pub source_duration_s: f64,
    pub frame_hop_s: f64,
}

impl Template {
    pub fn new(
        frames: Matrix,
        keyword: impl Into<String>,
        source_duration_s: f64,
        frame_hop_s: f64,
    ) -> Result<Self> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(KwsError::param("template must have at least one frame"));
        }
        if let Some(r) = (0..frames.rows()).find(|&r| !(norm(frames.row(r)) > 0.0)) {
            return Err(KwsError::NumericDomain(format!("template frame {r} has zero norm")));
        }
        if !(source_duration_s > 0.0 && frame_hop_s > 0.0) {
            return Err(KwsError::param("template durations must be positive"));
        }
        Ok(Self {
            frames,
            keyword: keyword.into(),
            source_duration_s,
            frame_hop_s,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub(crate) fn meta(&self) -> TemplateMeta {
        TemplateMeta {
            keyword: self.keyword.clone(),
            source_duration_s: self.source_duration_s,
            frame_hop_s: self.frame_hop_s,
        }
    }
}

/// Running per-grid-cell mean of segment frames. Segments can be added in
/// any order and are not retained.
#[derive(Debug, Clone)]
pub struct TemplateAccumulator {
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl TemplateAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sums: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Adds the rows of `frames` at grid positions `start, start+1, ...`.
    pub fn add(&mut self, start: usize, frames: &Matrix) -> Result<()> {
        if frames.cols() != self.dim {
            return Err(KwsError::param(format!(
                "segment has {} dims, accumulator {}",
                frames.cols(),
                self.dim
            )));
        }
        let end = start + frames.rows();
        if self.counts.len() < end {
            self.counts.resize(end, 0);
            self.sums.resize(end * self.dim, 0.0);
        }
        for (k, row) in frames.iter_rows().enumerate() {
            let g = start + k;
            self.counts[g] += 1;
            self.sums[g * self.dim..(g + 1) * self.dim]
                .iter_mut()
                .zip(row)
                .for_each(|(s, x)| *s += x);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn finish(self) -> Result<Matrix> {
        if self.counts.is_empty() {
            return Err(KwsError::param("no segments to assemble"));
        }
        if let Some(g) = self.counts.iter().position(|&c| c == 0) {
            return Err(KwsError::param(format!("grid position {g} is not covered by any segment")));
        }
        let mut data = self.sums;
        for (row, &c) in data.chunks_exact_mut(self.dim).zip(&self.counts) {
            row.iter_mut().for_each(|v| *v /= c as f64);
        }
        Matrix::from_vec(self.counts.len(), self.dim, data)
    }
}

/// Mean of all segment rows mapped to each grid position. Each item is a
/// segment's frames and its start position on the common frame grid.
pub fn assemble_template(segments: &[(Matrix, usize)]) -> Result<Matrix> {
    let first = segments
        .first()
        .ok_or_else(|| KwsError::param("no segments to assemble"))?;
    let mut acc = TemplateAccumulator::new(first.0.cols());
    for (frames, start) in segments {
        acc.add(*start, frames)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment_is_unchanged() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(assemble_template(&[(a.clone(), 0)]).unwrap(), a);
    }

    #[test]
    fn constant_segments_stay_constant() {
        let v = Matrix::filled(3, 2, 0.5);
        let t = assemble_template(&[(v.clone(), 0), (v, 1)]).unwrap();
        assert_eq!(t, Matrix::filled(4, 2, 0.5));
    }

    #[test]
    fn shared_cell_is_averaged() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![4.0, 4.0], vec![0.0, 1.0]]).unwrap();
        let t = assemble_template(&[(a, 0), (b, 1)]).unwrap();
        assert_eq!(t.row(0), &[1.0, 0.0]);
        assert_eq!(t.row(1), &[3.0, 3.0]);
        assert_eq!(t.row(2), &[0.0, 1.0]);
    }

    #[test]
    fn gaps_and_empty_input_fail() {
        assert!(assemble_template(&[]).is_err());
        let a = Matrix::filled(1, 2, 1.0);
        assert!(assemble_template(&[(a.clone(), 0), (a, 2)]).is_err());
    }

    #[test]
    fn template_rejects_zero_rows() {
        assert!(Template::new(Matrix::zeros(2, 2), "a", 1.0, 0.016).is_err());
        assert!(Template::new(Matrix::filled(2, 2, 1.0), "a", 1.0, 0.016).is_ok());
    }
}
