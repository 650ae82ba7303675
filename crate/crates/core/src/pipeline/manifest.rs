//! Dataset manifests: one JSON document listing every video, its feature
//! CSV and its trait scores.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::openface::{parse_openface_csv, ColumnConfig, FrameFeatures};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    /// Feature CSV, relative to the manifest's directory unless absolute.
    pub features: PathBuf,
    pub scores: BTreeMap<String, f64>,
    /// `train`/`val`/`test` or a fold id; free-form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub traits: Vec<String>,
    pub entries: Vec<VideoEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(traits: Vec<String>, entries: Vec<VideoEntry>) -> Manifest {
        Manifest { version: MANIFEST_VERSION, traits, entries, base_dir: PathBuf::new() }
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Manifest> {
        let mut m: Manifest = serde_json::from_str(text)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::UnsupportedVersion(m.version));
        }
        m.base_dir = base_dir.to_path_buf();
        m.validate_scores()?;
        Ok(m)
    }

    /// Loads and checks that every listed feature file exists.
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Manifest::from_json(&text, &base)?;
        for e in &m.entries {
            let p = m.resolve(e);
            if !p.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{}: feature file {} not found", e.video_id, p.display()),
                )));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    fn validate_scores(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.video_id) {
                return Err(Error::InvalidConfig(format!("duplicate video id {}", e.video_id)));
            }
            for (name, &s) in &e.scores {
                if !self.traits.contains(name) {
                    return Err(Error::InvalidConfig(format!("{}: unknown trait {name}", e.video_id)));
                }
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidConfig(format!("{}: {name} score {s} outside [0, 1]", e.video_id)));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &VideoEntry) -> PathBuf {
        if entry.features.is_absolute() {
            entry.features.clone()
        } else {
            self.base_dir.join(&entry.features)
        }
    }

    /// Scores for `trait_name`, in entry order.
    pub fn scores(&self, trait_name: &str) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| {
                e.scores.get(trait_name).copied().ok_or_else(|| {
                    Error::InvalidConfig(format!("{} has no score for trait {trait_name}", e.video_id))
                })
            })
            .collect()
    }

    /// Parses every feature file in parallel, keeping entry order.
    pub fn load_features(&self, cols: &ColumnConfig) -> Result<Vec<FrameFeatures>> {
        self.entries
            .par_iter()
            .map(|e| {
                let mut c = cols.clone();
                if e.fps.is_some() {
                    c.fps = e.fps;
                }
                let f = parse_openface_csv(&self.resolve(e), &e.video_id, &c)?;
                if f.report.dropped > 0 {
                    log::info!("{}: dropped {} of {} rows", e.video_id, f.report.dropped, f.report.data_rows);
                }
                Ok(f)
            })
            .collect()
    }
}
