//! "KWFE" feature dumps: little-endian header (magic, u32 version, u32 rows,
//! u32 cols), row-major f32 payload, plus a JSON sidecar next to the file.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureMatrix};
use crate::error::{KwsError, Result};
use crate::io_util::{read_f32_vec, read_u32, write_f32_slice};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"KWFE";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub kind: FeatureKind,
    pub hop_s: f64,
    pub source: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_features(path: &Path, features: &FeatureMatrix, source: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&(features.frames.rows() as u32).to_le_bytes())?;
    f.write_all(&(features.frames.cols() as u32).to_le_bytes())?;
    write_f32_slice(&mut f, features.frames.as_slice())?;
    let side = FeatureSidecar {
        kind: features.kind,
        hop_s: features.frame_step_s,
        source: source.to_owned(),
    };
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<(FeatureMatrix, FeatureSidecar)> {
    let mut f = fs::File::open(path)?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(KwsError::Format(format!("{}: not a KWFE file", path.display())));
    }
    let version = read_u32(&mut f)?;
    if version != VERSION {
        return Err(KwsError::Format(format!("unsupported KWFE version {version}")));
    }
    let rows = read_u32(&mut f)? as usize;
    let cols = read_u32(&mut f)? as usize;
    let data = read_f32_vec(&mut f, rows * cols)?;
    let side: FeatureSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    Ok((
        FeatureMatrix {
            frames: Matrix::from_vec(rows, cols, data)?,
            frame_step_s: side.hop_s,
            kind: side.kind,
        },
        side,
    ))
}
