//! Dominant facial action units per time window.
//!
//! An AU is dominant in a window when its maximum intensity there strictly
//! exceeds the mean of all AU intensities over the same window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{interpolate, resample_grid, WindowSpec};

pub const AU_COUNT: usize = 17;

/// AU numbers in OpenFace intensity-column order.
pub const AU_CODES: [u8; AU_COUNT] = [1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 45];

/// OpenFace column names for the intensity channels (`AU01_r` …).
pub fn au_column_names() -> Vec<String> {
    AU_CODES.iter().map(|c| format!("AU{c:02}_r")).collect()
}

pub type AuFrame = [f64; AU_COUNT];

#[derive(Debug, Clone, PartialEq)]
pub struct AUFrameTrack {
    pub video_id: String,
    pub fps: f64,
    pub timestamps: Vec<f64>,
    pub intensities: Vec<AuFrame>,
}

impl AUFrameTrack {
    pub fn new(video_id: impl Into<String>, fps: f64, timestamps: Vec<f64>, intensities: Vec<AuFrame>) -> Result<Self> {
        let t = AUFrameTrack { video_id: video_id.into(), fps, timestamps, intensities };
        if !(t.fps > 0.0) {
            return Err(Error::InvalidSeries(format!("fps must be positive, got {}", t.fps)));
        }
        if t.timestamps.len() != t.intensities.len() {
            return Err(Error::LengthMismatch { left: t.timestamps.len(), right: t.intensities.len() });
        }
        if t.intensities.iter().flatten().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidSeries("AU intensities must be finite and non-negative".into()));
        }
        Ok(t)
    }

    pub fn uniform(video_id: impl Into<String>, fps: f64, intensities: Vec<AuFrame>) -> Result<Self> {
        let timestamps = (0..intensities.len()).map(|i| i as f64 / fps).collect();
        Self::new(video_id, fps, timestamps, intensities)
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn slice(&self, start: usize, end: usize) -> AUFrameTrack {
        AUFrameTrack {
            video_id: self.video_id.clone(),
            fps: self.fps,
            timestamps: self.timestamps[start..end].to_vec(),
            intensities: self.intensities[start..end].to_vec(),
        }
    }

    pub fn resample(&self, target_fps: f64) -> Result<AUFrameTrack> {
        if (self.fps - target_fps).abs() < 1e-9 || self.is_empty() {
            return Ok(self.clone());
        }
        let grid = resample_grid(&self.timestamps, target_fps);
        let mut out = vec![[0.0; AU_COUNT]; grid.len()];
        for a in 0..AU_COUNT {
            let ch: Vec<f64> = self.intensities.iter().map(|f| f[a]).collect();
            for (row, v) in out.iter_mut().zip(interpolate(&self.timestamps, &ch, &grid)) {
                row[a] = v;
            }
        }
        AUFrameTrack::new(self.video_id.clone(), target_fps, grid, out)
    }
}

/// Per-window dominance flags (1 = dominant), in [`AU_CODES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AUSequence {
    pub video_id: String,
    pub window_starts: Vec<f64>,
    pub dominance: Vec<[u8; AU_COUNT]>,
    pub window_len_s: f64,
    pub step_s: f64,
}

impl AUSequence {
    pub fn len(&self) -> usize {
        self.dominance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dominance.is_empty()
    }
}

/// Dominance vector for a single window of frames.
pub fn window_dominance(frames: &[AuFrame]) -> [u8; AU_COUNT] {
    let n = (frames.len() * AU_COUNT) as f64;
    let mean = frames.iter().flatten().sum::<f64>() / n;
    let mut out = [0u8; AU_COUNT];
    for (a, flag) in out.iter_mut().enumerate() {
        let max = frames.iter().map(|f| f[a]).fold(f64::NEG_INFINITY, f64::max);
        *flag = (max > mean) as u8;
    }
    out
}

/// Slides a `window_s` window with hop `step_s` over the track.
pub fn dominant_au_sequence(track: &AUFrameTrack, window_s: f64, step_s: f64) -> Result<AUSequence> {
    let spec = WindowSpec::from_step(window_s, step_s, track.fps)?;
    if track.len() < spec.len_frames {
        return Err(Error::TrackTooShort { frames: track.len(), needed: spec.len_frames });
    }
    let mut window_starts = Vec::new();
    let mut dominance = Vec::new();
    for st in spec.starts(track.len()) {
        window_starts.push(track.timestamps[st]);
        dominance.push(window_dominance(&track.intensities[st..st + spec.len_frames]));
    }
    Ok(AUSequence { video_id: track.video_id.clone(), window_starts, dominance, window_len_s: window_s, step_s })
}
