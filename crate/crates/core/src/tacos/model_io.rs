//! "KWEM" model files.
//!
//! Little-endian: magic, u32 version, u32 D_emb, u32 N_kw, u32 N_pos,
//! u32 N_cluster, f64 scale, f32 affine weights (64 x D_emb, row-major by
//! input dimension), f32 bias (D_emb), f32 centers
//! (N_cluster x N_kw x N_pos x D_emb), then a JSON trailer to end of file.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embedder::{FrameEmbedder, TrainConfig, TrainedModel};
use super::loss::ClusterCenters;
use super::scale::AdaptiveScale;
use crate::error::{KwsError, Result};
use crate::frontend::N_MELS;
use crate::io_util::{read_f32_vec, read_f64, read_u32, write_f32_slice};
use crate::labels::KeywordLabelSpace;

pub const MAGIC: &[u8; 4] = b"KWEM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelTrailer {
    pub label_space: KeywordLabelSpace,
    pub n_pos: usize,
    pub config: TrainConfig,
    pub reversed_segments: bool,
    pub position_loss: bool,
    pub loss_trace: Vec<f64>,
    pub scale_updates: u64,
}

pub fn encode_model(model: &TrainedModel) -> Result<Vec<u8>> {
    if model.embedder.in_dim() != N_MELS {
        return Err(KwsError::Format(format!(
            "model input must be {N_MELS} Mel bins, got {}",
            model.embedder.in_dim()
        )));
    }
    let c = &model.centers;
    let mut buf = Vec::new();
    buf.write_all(MAGIC)?;
    for v in [VERSION, c.dim() as u32, c.n_kw() as u32, c.n_pos() as u32, c.n_cluster() as u32] {
        buf.write_all(&v.to_le_bytes())?;
    }
    buf.write_all(&model.scale.value.to_le_bytes())?;
    write_f32_slice(&mut buf, model.embedder.weights())?;
    write_f32_slice(&mut buf, model.embedder.bias())?;
    write_f32_slice(&mut buf, c.as_slice())?;
    let trailer = ModelTrailer {
        label_space: model.space.clone(),
        n_pos: model.n_pos,
        config: model.config,
        reversed_segments: model.space.has_reversed(),
        position_loss: model.config.pos_weight > 0.0,
        loss_trace: model.loss_trace.clone(),
        scale_updates: model.scale.updates,
    };
    serde_json::to_writer(&mut buf, &trailer)?;
    Ok(buf)
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| KwsError::Format("model file too short".into()))?;
    if &magic != MAGIC {
        return Err(KwsError::Format("not a KWEM model file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(KwsError::Format(format!("unsupported KWEM version {version}")));
    }
    let d_emb = read_u32(&mut r)? as usize;
    let n_kw = read_u32(&mut r)? as usize;
    let n_pos = read_u32(&mut r)? as usize;
    let n_cluster = read_u32(&mut r)? as usize;
    let scale = read_f64(&mut r)?;
    let weights = read_f32_vec(&mut r, N_MELS * d_emb)?;
    let bias = read_f32_vec(&mut r, d_emb)?;
    let centers = read_f32_vec(&mut r, n_cluster * n_kw * n_pos * d_emb)?;
    let trailer: ModelTrailer = serde_json::from_slice(&bytes[r.position() as usize..])?;
    if trailer.label_space.n_kw() != n_kw || trailer.n_pos != n_pos {
        return Err(KwsError::Format(
            "model header disagrees with its label-space trailer".into(),
        ));
    }
    Ok(TrainedModel {
        embedder: FrameEmbedder::from_parts(N_MELS, d_emb, weights, bias)?,
        centers: ClusterCenters::from_vec(n_cluster, n_kw, n_pos, d_emb, centers)?,
        scale: AdaptiveScale {
            value: scale,
            n_cells: n_kw * n_pos,
            updates: trailer.scale_updates,
        },
        space: trailer.label_space,
        n_pos,
        config: trailer.config,
        loss_trace: trailer.loss_trace,
    })
}

pub fn write_model(path: &Path, model: &TrainedModel) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<TrainedModel> {
    decode_model(&fs::read(path)?)
}
