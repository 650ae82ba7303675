//! Thin slices: cutting a video into consecutive fixed-length chunks.

use serde::{Deserialize, Serialize};

use crate::action_units::AUFrameTrack;
use crate::error::{Error, Result};
use crate::pose::HeadPoseSeries;

/// What happens to frames left over after the last full chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Remainder {
    #[default]
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub len_s: f64,
    #[serde(default)]
    pub remainder: Remainder,
}

impl ChunkSpec {
    pub fn seconds(len_s: f64) -> ChunkSpec {
        ChunkSpec { len_s, remainder: Remainder::Drop }
    }

    pub fn frames(&self, fps: f64) -> usize {
        (self.len_s * fps).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub video_id: String,
    pub index: usize,
    pub pose: HeadPoseSeries,
    pub aus: AUFrameTrack,
}

/// Splits aligned pose and AU streams into non-overlapping chunks.
///
/// `min_frames` is the shortest chunk downstream windowing can use.
pub fn chunk_series(pose: &HeadPoseSeries, aus: &AUFrameTrack, spec: ChunkSpec, min_frames: usize) -> Result<Vec<Chunk>> {
    if !(spec.len_s > 0.0) {
        return Err(Error::InvalidConfig(format!("chunk length must be positive, got {}", spec.len_s)));
    }
    if pose.len() != aus.len() {
        return Err(Error::LengthMismatch { left: pose.len(), right: aus.len() });
    }
    let n = spec.frames(pose.fps);
    if n < min_frames {
        return Err(Error::ChunkTooShort { chunk_frames: n, window_frames: min_frames });
    }
    Ok((0..pose.len() / n)
        .map(|i| Chunk {
            video_id: pose.video_id.clone(),
            index: i,
            pose: pose.slice(i * n, (i + 1) * n),
            aus: aus.slice(i * n, (i + 1) * n),
        })
        .collect())
}
