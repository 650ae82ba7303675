//! Head-pose streams and the sliding-window characterization matrix.
//!
//! A [`HeadPoseSeries`] is cut into overlapping windows of `ℓ` frames; each
//! window becomes one column `[pitch(ℓ) | yaw(ℓ) | roll(ℓ)]` of a
//! [`SegmentMatrix`]. Columns from many series are concatenated and shifted
//! by per-channel [`ChannelOffsets`] so every entry is non-negative, which is
//! what the factorization stage needs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-frame pitch/yaw/roll angles (radians) for one video or chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadPoseSeries {
    pub video_id: String,
    pub fps: f64,
    pub timestamps: Vec<f64>,
    pub pitch: Vec<f64>,
    pub yaw: Vec<f64>,
    pub roll: Vec<f64>,
}

impl HeadPoseSeries {
    pub fn new(
        video_id: impl Into<String>,
        fps: f64,
        timestamps: Vec<f64>,
        pitch: Vec<f64>,
        yaw: Vec<f64>,
        roll: Vec<f64>,
    ) -> Result<Self> {
        let series = HeadPoseSeries {
            video_id: video_id.into(),
            fps,
            timestamps,
            pitch,
            yaw,
            roll,
        };
        series.validate()?;
        Ok(series)
    }

    /// Builds a series sampled uniformly at `fps`, starting at t = 0.
    pub fn uniform(
        video_id: impl Into<String>,
        fps: f64,
        pitch: Vec<f64>,
        yaw: Vec<f64>,
        roll: Vec<f64>,
    ) -> Result<Self> {
        let timestamps = (0..pitch.len()).map(|i| i as f64 / fps).collect();
        Self::new(video_id, fps, timestamps, pitch, yaw, roll)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::InvalidSeries(format!("fps must be positive, got {}", self.fps)));
        }
        let t = self.timestamps.len();
        if t == 0 {
            return Err(Error::InvalidSeries("series has no frames".into()));
        }
        for (name, ch) in [("pitch", &self.pitch), ("yaw", &self.yaw), ("roll", &self.roll)] {
            if ch.len() != t {
                return Err(Error::InvalidSeries(format!(
                    "{name} has {} frames, timestamps have {t}",
                    ch.len()
                )));
            }
        }
        if self.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries("timestamps are not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fps
    }

    /// Frames `[start, end)` as a new series sharing the video id.
    pub fn slice(&self, start: usize, end: usize) -> HeadPoseSeries {
        HeadPoseSeries {
            video_id: self.video_id.clone(),
            fps: self.fps,
            timestamps: self.timestamps[start..end].to_vec(),
            pitch: self.pitch[start..end].to_vec(),
            yaw: self.yaw[start..end].to_vec(),
            roll: self.roll[start..end].to_vec(),
        }
    }

    pub fn channels(&self) -> [&[f64]; 3] {
        [&self.pitch, &self.yaw, &self.roll]
    }

    /// Linearly interpolates every channel onto a uniform grid at `target_fps`.
    ///
    /// Returns a clone when the rate already matches.
    pub fn resample(&self, target_fps: f64) -> Result<HeadPoseSeries> {
        if (self.fps - target_fps).abs() < 1e-9 {
            return Ok(self.clone());
        }
        let grid = resample_grid(&self.timestamps, target_fps);
        let pitch = interpolate(&self.timestamps, &self.pitch, &grid);
        let yaw = interpolate(&self.timestamps, &self.yaw, &grid);
        let roll = interpolate(&self.timestamps, &self.roll, &grid);
        HeadPoseSeries::new(self.video_id.clone(), target_fps, grid, pitch, yaw, roll)
    }
}

pub(crate) fn resample_grid(timestamps: &[f64], target_fps: f64) -> Vec<f64> {
    let t0 = timestamps[0];
    let t_end = *timestamps.last().unwrap();
    let n = ((t_end - t0) * target_fps + 1e-9).floor() as usize + 1;
    (0..n).map(|i| t0 + i as f64 / target_fps).collect()
}

pub(crate) fn interpolate(times: &[f64], values: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut j = 0;
    grid.iter()
        .map(|&t| {
            while j + 1 < times.len() && times[j + 1] <= t {
                j += 1;
            }
            if j + 1 >= times.len() {
                return values[times.len() - 1];
            }
            let w = ((t - times[j]) / (times[j + 1] - times[j])).clamp(0.0, 1.0);
            values[j] + w * (values[j + 1] - values[j])
        })
        .collect()
}

/// Window length and hop, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub len_frames: usize,
    pub step_frames: usize,
}

impl WindowSpec {
    /// `ℓ = round(len_s·fps)`, `step = round(ℓ·(1 − overlap))`, at least one frame.
    pub fn from_overlap(len_s: f64, overlap_fraction: f64, fps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap_fraction) {
            return Err(Error::InvalidOverlap(overlap_fraction));
        }
        let len_frames = (len_s * fps).round() as usize;
        if len_frames < 2 {
            return Err(Error::SegmentTooShort(len_frames));
        }
        let step_frames = ((len_frames as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
        Ok(WindowSpec { len_frames, step_frames })
    }

    /// Window and hop given directly in seconds.
    pub fn from_step(len_s: f64, step_s: f64, fps: f64) -> Result<Self> {
        let len_frames = (len_s * fps).round() as usize;
        if len_frames < 2 {
            return Err(Error::SegmentTooShort(len_frames));
        }
        let step_frames = ((step_s * fps).round() as usize).max(1);
        Ok(WindowSpec { len_frames, step_frames })
    }

    /// `floor((T − ℓ)/step) + 1`, or 0 when the series is shorter than a window.
    pub fn count(&self, frames: usize) -> usize {
        if frames < self.len_frames {
            0
        } else {
            (frames - self.len_frames) / self.step_frames + 1
        }
    }

    pub fn starts(&self, frames: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.count(frames)).map(move |i| i * self.step_frames)
    }
}

/// Identifies which series and window a matrix column came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSource {
    pub video_id: String,
    pub window: usize,
}

/// Columns of stacked `pitch‖yaw‖roll` windows, each of dimension `3ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatrix {
    pub data: DMatrix<f64>,
    pub window: WindowSpec,
    pub sources: Vec<SegmentSource>,
}

impl SegmentMatrix {
    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }
}

/// Cuts `series` into overlapping windows of `segment_len_s` seconds.
pub fn segment_series(
    series: &HeadPoseSeries,
    segment_len_s: f64,
    overlap_fraction: f64,
) -> Result<SegmentMatrix> {
    let window = WindowSpec::from_overlap(segment_len_s, overlap_fraction, series.fps)?;
    segment_frames(series, window)
}

/// Frame-level variant of [`segment_series`].
pub fn segment_frames(series: &HeadPoseSeries, window: WindowSpec) -> Result<SegmentMatrix> {
    let ell = window.len_frames;
    if ell < 2 {
        return Err(Error::SegmentTooShort(ell));
    }
    if series.len() < ell {
        return Err(Error::SeriesTooShort { frames: series.len(), needed: ell });
    }
    let s = window.count(series.len());
    let channels = series.channels();
    let mut data = DMatrix::zeros(3 * ell, s);
    let mut sources = Vec::with_capacity(s);
    for (i, start) in window.starts(series.len()).enumerate() {
        let mut col = data.column_mut(i);
        for (c, ch) in channels.iter().enumerate() {
            for f in 0..ell {
                col[c * ell + f] = ch[start + f];
            }
        }
        sources.push(SegmentSource { video_id: series.video_id.clone(), window: i });
    }
    Ok(SegmentMatrix { data, window, sources })
}

/// Additive per-channel offsets that make the stacked matrix non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelOffsets {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

impl ChannelOffsets {
    pub fn as_array(&self) -> [f64; 3] {
        [self.pitch, self.yaw, self.roll]
    }

    /// Shifts a raw column in place, clamping anything still negative to 0.
    /// Returns how many entries were clamped.
    pub fn shift_column(&self, column: &mut [f64]) -> Result<usize> {
        if !column.len().is_multiple_of(3) {
            return Err(Error::DimensionMismatch {
                expected: column.len().div_ceil(3) * 3,
                got: column.len(),
            });
        }
        let ell = column.len() / 3;
        let offs = self.as_array();
        let mut clamped = 0;
        for (c, off) in offs.iter().enumerate() {
            for v in &mut column[c * ell..(c + 1) * ell] {
                *v += off;
                if *v < 0.0 {
                    *v = 0.0;
                    clamped += 1;
                }
            }
        }
        Ok(clamped)
    }
}

/// Concatenates per-video segment matrices and shifts each channel by the
/// negated global minimum of that channel.
pub fn stack_and_shift(per_video: &[SegmentMatrix]) -> Result<(SegmentMatrix, ChannelOffsets)> {
    let first = per_video.first().ok_or(Error::EmptyInput)?;
    let window = first.window;
    if per_video.iter().any(|m| m.window != window) {
        return Err(Error::MixedSegmentLength);
    }
    let total: usize = per_video.iter().map(SegmentMatrix::ncols).sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let ell = window.len_frames;
    let mut data = DMatrix::zeros(3 * ell, total);
    let mut sources = Vec::with_capacity(total);
    let mut col = 0;
    for m in per_video {
        data.columns_mut(col, m.ncols()).copy_from(&m.data);
        sources.extend(m.sources.iter().cloned());
        col += m.ncols();
    }

    let mut offs = [0.0; 3];
    for (c, off) in offs.iter_mut().enumerate() {
        let min = data.rows(c * ell, ell).min();
        *off = if min < 0.0 { -min } else { 0.0 };
    }
    for (c, off) in offs.iter().enumerate() {
        if *off != 0.0 {
            data.rows_mut(c * ell, ell).add_scalar_mut(*off);
        }
    }
    let offsets = ChannelOffsets { pitch: offs[0], yaw: offs[1], roll: offs[2] };
    Ok((SegmentMatrix { data, window, sources }, offsets))
}

/// One window in angle space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTrajectory {
    pub pitch: Vec<f64>,
    pub yaw: Vec<f64>,
    pub roll: Vec<f64>,
}

impl AngleTrajectory {
    pub fn len(&self) -> usize {
        self.pitch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch.is_empty()
    }

    /// Flattens back to `pitch‖yaw‖roll`.
    pub fn to_column(&self) -> DVector<f64> {
        DVector::from_iterator(
            3 * self.len(),
            self.pitch.iter().chain(&self.yaw).chain(&self.roll).copied(),
        )
    }

    pub fn rms(&self) -> f64 {
        let n = 3 * self.len();
        let ss: f64 = self.pitch.iter().chain(&self.yaw).chain(&self.roll).map(|v| v * v).sum();
        (ss / n as f64).sqrt()
    }
}

/// Undoes the channel shift of a `3ℓ` column.
pub fn unshift_column(column: &[f64], offsets: &ChannelOffsets) -> Result<AngleTrajectory> {
    if !column.len().is_multiple_of(3) || column.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: column.len().div_ceil(3).max(1) * 3,
            got: column.len(),
        });
    }
    let ell = column.len() / 3;
    let offs = offsets.as_array();
    let part = |c: usize| column[c * ell..(c + 1) * ell].iter().map(|v| v - offs[c]).collect();
    Ok(AngleTrajectory { pitch: part(0), yaw: part(1), roll: part(2) })
}
