//! On-disk corpus layout:
//!
//! ```text
//! root/train/<keyword>/<n>.wav
//! root/{val,test}/sentences/*.wav
//! root/{val,test}/annotations.tsv
//! root/noise/*.wav
//! ```
//!
//! The `file` column of an annotation TSV holds a sentence file name.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{KwsError, Result};
use crate::eval::{read_annotations, Event};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainFile {
    pub path: PathBuf,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    pub sentences: Vec<PathBuf>,
    pub annotations: Vec<Event>,
}

impl EvalSplit {
    /// Sentence file name as used in annotations.
    pub fn file_name(path: &Path) -> String {
        path.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusLayout {
    pub root: PathBuf,
    /// Sorted keyword names, taken from the training directories.
    pub keywords: Vec<String>,
    pub train: Vec<TrainFile>,
    pub validation: EvalSplit,
    pub test: EvalSplit,
    pub noise: Vec<PathBuf>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| KwsError::layout(dir, e.to_string()))?;
    let mut v: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
    v.sort();
    Ok(v)
}

fn wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect())
}

fn load_split(root: &Path, name: &str, keywords: &BTreeSet<String>) -> Result<EvalSplit> {
    let dir = root.join(name);
    let sentences = wavs(&dir.join("sentences"))?;
    let tsv = dir.join("annotations.tsv");
    if !tsv.is_file() {
        return Err(KwsError::layout(&tsv, "missing annotation file"));
    }
    let annotations = read_annotations(&tsv).map_err(|e| KwsError::layout(&tsv, e.to_string()))?;
    let names: BTreeSet<String> = sentences.iter().map(|p| EvalSplit::file_name(p)).collect();
    for a in &annotations {
        if !keywords.contains(&a.keyword) {
            return Err(KwsError::layout(
                &tsv,
                format!("annotation keyword {:?} has no training directory", a.keyword),
            ));
        }
        if !names.contains(&a.file) {
            return Err(KwsError::layout(
                &tsv,
                format!("annotation refers to missing sentence {:?}", a.file),
            ));
        }
    }
    Ok(EvalSplit {
        sentences,
        annotations,
    })
}

pub fn load_corpus(root: &Path) -> Result<CorpusLayout> {
    let train_dir = root.join("train");
    let mut train = Vec::new();
    let mut keywords = BTreeSet::new();
    for dir in sorted_entries(&train_dir)?.into_iter().filter(|p| p.is_dir()) {
        let keyword = EvalSplit::file_name(&dir);
        let files = wavs(&dir)?;
        if files.is_empty() {
            return Err(KwsError::layout(&dir, "keyword directory holds no WAV files"));
        }
        train.extend(files.into_iter().map(|path| TrainFile {
            path,
            keyword: keyword.clone(),
        }));
        keywords.insert(keyword);
    }
    if keywords.is_empty() {
        return Err(KwsError::layout(&train_dir, "no keyword directories"));
    }
    let validation = load_split(root, "val", &keywords)?;
    let test = load_split(root, "test", &keywords)?;
    let noise_dir = root.join("noise");
    let noise = wavs(&noise_dir)?;
    if noise.is_empty() {
        return Err(KwsError::layout(&noise_dir, "no noise recordings"));
    }
    Ok(CorpusLayout {
        root: root.to_path_buf(),
        keywords: keywords.into_iter().collect(),
        train,
        validation,
        test,
        noise,
    })
}
