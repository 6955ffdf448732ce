//! Annotated and detected events and their TSV files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub file: String,
    pub onset_s: f64,
    pub offset_s: f64,
    pub keyword: String,
}

impl Event {
    pub fn new(file: impl Into<String>, onset_s: f64, offset_s: f64, keyword: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            onset_s,
            offset_s,
            keyword: keyword.into(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.onset_s.is_finite() && self.offset_s.is_finite() && self.onset_s < self.offset_s) {
            return Err(KwsError::Validation(format!(
                "{}: event {:?} has onset {} and offset {}",
                self.file, self.keyword, self.onset_s, self.offset_s
            )));
        }
        if self.file.is_empty() || self.keyword.is_empty() {
            return Err(KwsError::Validation("event with empty file or keyword".into()));
        }
        Ok(())
    }
}

/// One row of a detections TSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub file: String,
    pub onset_s: f64,
    pub offset_s: f64,
    pub keyword: String,
    pub score: f64,
}

impl DetectionRecord {
    pub fn event(&self) -> Event {
        Event::new(&self.file, self.onset_s, self.offset_s, &self.keyword)
    }
}

fn tsv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .from_path(path)?)
}

fn check_header(path: &Path, rdr: &mut csv::Reader<fs::File>, want: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if got != want {
        return Err(KwsError::Validation(format!(
            "{}: expected columns {want:?}, found {got:?}",
            path.display()
        )));
    }
    Ok(())
}

pub fn read_annotations(path: &Path) -> Result<Vec<Event>> {
    let mut rdr = tsv_reader(path)?;
    check_header(path, &mut rdr, &["file", "onset_s", "offset_s", "keyword"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let e: Event = row?;
        e.validate()?;
        out.push(e);
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, events: &[Event]) -> Result<()> {
    let mut s = String::from("file\tonset_s\toffset_s\tkeyword\n");
    for e in events {
        s.push_str(&format!("{}\t{:.6}\t{:.6}\t{}\n", e.file, e.onset_s, e.offset_s, e.keyword));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let mut rdr = tsv_reader(path)?;
    check_header(path, &mut rdr, &["file", "onset_s", "offset_s", "keyword", "score"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let d: DetectionRecord = row?;
        d.event().validate()?;
        out.push(d);
    }
    Ok(out)
}

pub fn format_detections(records: &[DetectionRecord]) -> String {
    let mut s = String::from("file\tonset_s\toffset_s\tkeyword\tscore\n");
    for d in records {
        s.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{}\t{:.6}\n",
            d.file, d.onset_s, d.offset_s, d.keyword, d.score
        ));
    }
    s
}

pub fn write_detections(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    fs::write(path, format_detections(records))?;
    Ok(())
}
