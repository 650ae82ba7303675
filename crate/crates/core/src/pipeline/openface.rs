//! Reading and writing OpenFace-style per-frame feature CSVs.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action_units::{au_column_names, AUFrameTrack, AuFrame, AU_COUNT};
use crate::error::{Error, Result};
use crate::pose::HeadPoseSeries;

/// Which CSV columns hold what. Header names are matched after trimming,
/// since OpenFace pads them with spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnConfig {
    pub timestamp: String,
    pub pitch: String,
    pub yaw: String,
    pub roll: String,
    /// The 17 AU intensity columns, in canonical AU order.
    pub aus: Vec<String>,
    /// Multiplier taking the pose columns to radians.
    pub angle_scale: f64,
    /// Frame rate; estimated from the timestamps when absent.
    pub fps: Option<f64>,
}

impl Default for ColumnConfig {
    fn default() -> Self {
        ColumnConfig {
            timestamp: "timestamp".into(),
            pitch: "pose_Rx".into(),
            yaw: "pose_Ry".into(),
            roll: "pose_Rz".into(),
            aus: au_column_names(),
            angle_scale: 1.0,
            fps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub data_rows: usize,
    pub kept: usize,
    /// Rows skipped because a needed field was empty or NaN.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    pub pose: HeadPoseSeries,
    pub aus: AUFrameTrack,
    pub report: LoadReport,
}

pub fn parse_openface_csv(path: &Path, video_id: &str, cols: &ColumnConfig) -> Result<FrameFeatures> {
    let file = std::fs::File::open(path)?;
    parse_openface(file, video_id, cols).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        e => e,
    })
}

/// Parses CSV text from any reader. Row numbers in errors count data rows from 1.
pub fn parse_openface<R: Read>(reader: R, video_id: &str, cols: &ColumnConfig) -> Result<FrameFeatures> {
    if cols.aus.len() != AU_COUNT {
        return Err(Error::InvalidConfig(format!("expected {AU_COUNT} AU columns, got {}", cols.aus.len())));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() => h.clone(),
        Ok(_) => return Err(Error::EmptyFile(Default::default())),
        Err(e) => return Err(e.into()),
    };
    let wanted: Vec<&str> = [&cols.timestamp, &cols.pitch, &cols.yaw, &cols.roll]
        .into_iter()
        .chain(&cols.aus)
        .map(String::as_str)
        .collect();
    let mut index = Vec::with_capacity(wanted.len());
    let mut missing = Vec::new();
    for name in &wanted {
        match headers.iter().position(|h| h == *name) {
            Some(i) => index.push(i),
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingColumn(missing));
    }

    let mut report = LoadReport::default();
    let mut ts = Vec::new();
    let mut angles = [Vec::new(), Vec::new(), Vec::new()];
    let mut frames: Vec<AuFrame> = Vec::new();
    let mut values = vec![0.0; wanted.len()];
    for (row, rec) in rdr.records().enumerate() {
        let row = row + 1;
        let rec = rec.map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        report.data_rows += 1;
        let mut complete = true;
        for (slot, (&i, name)) in values.iter_mut().zip(index.iter().zip(&wanted)) {
            let field = rec.get(i).unwrap_or("");
            if field.is_empty() {
                complete = false;
                break;
            }
            *slot = field
                .parse::<f64>()
                .map_err(|_| Error::MalformedRow { row, reason: format!("{name}: cannot parse {field:?}") })?;
            if slot.is_nan() {
                complete = false;
                break;
            }
        }
        if !complete {
            report.dropped += 1;
            continue;
        }
        ts.push(values[0]);
        for c in 0..3 {
            angles[c].push(values[1 + c] * cols.angle_scale);
        }
        let mut f = [0.0; AU_COUNT];
        f.copy_from_slice(&values[4..]);
        frames.push(f);
    }
    report.kept = ts.len();
    if ts.is_empty() {
        return Err(Error::EmptyFile(Default::default()));
    }
    let fps = match cols.fps {
        Some(f) => f,
        None => estimate_fps(&ts)?,
    };
    let [pitch, yaw, roll] = angles;
    let pose = HeadPoseSeries::new(video_id, fps, ts.clone(), pitch, yaw, roll)?;
    // trackers occasionally emit tiny negative intensities
    for f in &mut frames {
        f.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let aus = AUFrameTrack::new(video_id, fps, ts, frames)?;
    Ok(FrameFeatures { pose, aus, report })
}

/// Frame rate from the median timestamp increment.
fn estimate_fps(ts: &[f64]) -> Result<f64> {
    if ts.len() < 2 {
        return Err(Error::InvalidSeries("cannot infer fps from a single frame".into()));
    }
    let mut d: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    let med = d[d.len() / 2];
    if !(med > 0.0) {
        return Err(Error::InvalidSeries("timestamps are not increasing".into()));
    }
    Ok((1.0 / med * 1e6).round() / 1e6)
}

/// Writes pose and AU channels with the default OpenFace header.
pub fn write_openface<W: Write>(writer: W, pose: &HeadPoseSeries, aus: &AUFrameTrack) -> Result<()> {
    if pose.len() != aus.len() {
        return Err(Error::LengthMismatch { left: pose.len(), right: aus.len() });
    }
    let cols = ColumnConfig::default();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["frame".to_string(), cols.timestamp, cols.pitch, cols.yaw, cols.roll];
    header.extend(cols.aus);
    w.write_record(&header)?;
    for i in 0..pose.len() {
        let mut rec = vec![(i + 1).to_string(), pose.timestamps[i].to_string()];
        rec.extend([pose.pitch[i], pose.yaw[i], pose.roll[i]].iter().map(f64::to_string));
        rec.extend(aus.intensities[i].iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_openface_csv(path: &Path, pose: &HeadPoseSeries, aus: &AUFrameTrack) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_openface(file, pose, aus)
}
