//! Per-video model inputs: kineme symbols, dominant-AU flags and raw pose,
//! optionally cut into chunks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chunk::{chunk_series, ChunkSpec};
use super::openface::FrameFeatures;
use crate::action_units::{dominant_au_sequence, AU_COUNT};
use crate::codebook::{encode_series, Codebook};
use crate::error::{Error, Result};
use crate::pose::HeadPoseSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub au_window_s: f64,
    pub au_step_s: f64,
    /// Thin-slice length; `None` keeps whole videos.
    pub chunk: Option<ChunkSpec>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { au_window_s: 2.0, au_step_s: 1.0, chunk: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkFeatures {
    pub kinemes: Vec<usize>,
    pub aus: Vec<[u8; AU_COUNT]>,
    /// yaw‖pitch‖roll samples, the PCA baseline's input.
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoItem {
    pub video_id: String,
    pub score: f64,
    pub chunks: Vec<ChunkFeatures>,
}

fn flatten_pose(p: &HeadPoseSeries) -> Vec<f64> {
    p.yaw.iter().chain(&p.pitch).chain(&p.roll).copied().collect()
}

/// Encodes every video (and chunk) against `codebook`. `scores[i]` belongs to `features[i]`.
pub fn build_items(features: &[FrameFeatures], scores: &[f64], codebook: &Codebook, cfg: &FeatureConfig) -> Result<Vec<VideoItem>> {
    if features.len() != scores.len() {
        return Err(Error::LengthMismatch { left: features.len(), right: scores.len() });
    }
    features
        .par_iter()
        .zip(scores)
        .map(|(f, &score)| {
            let pose = f.pose.resample(codebook.fps)?;
            let aus = f.aus.resample(codebook.fps)?;
            let n = pose.len().min(aus.len());
            let (pose, aus) = (pose.slice(0, n), aus.slice(0, n));
            let pieces = match cfg.chunk {
                Some(spec) => chunk_series(&pose, &aus, spec, codebook.window.len_frames)?
                    .into_iter()
                    .map(|c| (c.pose, c.aus))
                    .collect(),
                None => vec![(pose, aus)],
            };
            let chunks = pieces
                .iter()
                .map(|(p, a)| {
                    Ok(ChunkFeatures {
                        kinemes: encode_series(p, codebook)?.symbols,
                        aus: dominant_au_sequence(a, cfg.au_window_s, cfg.au_step_s)?.dominance,
                        pose: flatten_pose(p),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if chunks.is_empty() {
                log::warn!("{}: shorter than one chunk, no samples", f.pose.video_id);
            }
            Ok(VideoItem { video_id: f.pose.video_id.clone(), score, chunks })
        })
        .collect()
}
