//! "KWTE" template files: little-endian header (magic, u32 version, u32 L,
//! u32 D), row-major f32 frames, then a JSON trailer with the metadata.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};

use super::template::{Template, TemplateMeta};
use crate::error::{KwsError, Result};
use crate::io_util::{read_f32_vec, read_u32, write_f32_slice};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"KWTE";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "kwte";

pub fn encode_template(t: &Template) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.write_all(MAGIC)?;
    for v in [VERSION, t.len() as u32, t.dim() as u32] {
        buf.write_all(&v.to_le_bytes())?;
    }
    write_f32_slice(&mut buf, t.frames.as_slice())?;
    serde_json::to_writer(&mut buf, &t.meta())?;
    Ok(buf)
}

pub fn decode_template(bytes: &[u8]) -> Result<Template> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| KwsError::Format("template file too short".into()))?;
    if &magic != MAGIC {
        return Err(KwsError::Format("not a KWTE template file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(KwsError::Format(format!("unsupported KWTE version {version}")));
    }
    let len = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let data = read_f32_vec(&mut r, len * dim)?;
    let meta: TemplateMeta = serde_json::from_slice(&bytes[r.position() as usize..])?;
    Template::new(
        Matrix::from_vec(len, dim, data)?,
        meta.keyword,
        meta.source_duration_s,
        meta.frame_hop_s,
    )
}

pub fn write_template(path: &Path, t: &Template) -> Result<()> {
    fs::write(path, encode_template(t)?)?;
    Ok(())
}

pub fn read_template(path: &Path) -> Result<Template> {
    decode_template(&fs::read(path)?)
        .map_err(|e| KwsError::Format(format!("{}: {e}", path.display())))
}

/// All `*.kwte` files of a directory, in file-name order.
pub fn template_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn read_template_dir(dir: &Path) -> Result<Vec<Template>> {
    let templates = template_paths(dir)?
        .iter()
        .map(|p| read_template(p))
        .collect::<Result<Vec<_>>>()?;
    if templates.is_empty() {
        return Err(KwsError::Config(format!("no .{EXTENSION} templates in {}", dir.display())));
    }
    Ok(templates)
}
