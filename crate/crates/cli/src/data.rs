use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use kineme::analytics::{binarize_with, median, Task};
use kineme::pipeline::{build_items, FeatureConfig, FrameFeatures, Manifest, PipelineConfig, VideoItem};
use kineme::Codebook;
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// The manifest plus its parsed feature files, in entry order.
pub struct Corpus {
    pub manifest: Manifest,
    pub features: Vec<FrameFeatures>,
}

pub fn load_corpus(path: &Path, cfg: &PipelineConfig) -> Result<Corpus> {
    let manifest = Manifest::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
    let features = manifest.load_features(&cfg.columns)?;
    let dropped: usize = features.iter().map(|f| f.report.dropped).sum();
    log::info!("{} videos loaded, {dropped} rows dropped", features.len());
    Ok(Corpus { manifest, features })
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let text = fs::read_to_string(path).with_context(|| format!("reading codebook {}", path.display()))?;
    Ok(Codebook::from_json(&text)?)
}

pub fn check_trait(manifest: &Manifest, name: &str) -> Result<()> {
    if manifest.traits.iter().any(|t| t == name) {
        Ok(())
    } else {
        Err(UsageError(format!("trait {name:?} is not in the manifest ({})", manifest.traits.join(", "))).into())
    }
}

/// Encoded items for `trait_name`, in manifest order.
pub fn items(corpus: &Corpus, codebook: &Codebook, trait_name: &str, features: &FeatureConfig) -> Result<Vec<VideoItem>> {
    check_trait(&corpus.manifest, trait_name)?;
    let scores = corpus.manifest.scores(trait_name)?;
    Ok(build_items(&corpus.features, &scores, codebook, features)?)
}

pub fn split_of(manifest: &Manifest, i: usize) -> &str {
    manifest.entries[i].split.as_deref().unwrap_or("")
}

/// Per-video targets: raw scores for regression, 0/1 labels against
/// `threshold` for classification.
pub fn targets(items: &[VideoItem], task: Task, threshold: f64) -> Vec<f64> {
    let scores: Vec<f64> = items.iter().map(|v| v.score).collect();
    match task {
        Task::Regression => scores,
        Task::Classification => binarize_with(&scores, threshold).into_iter().map(|l| l.as_f64()).collect(),
    }
}

pub fn median_of(items: &[VideoItem], ids: &[usize]) -> Result<f64> {
    Ok(median(&ids.iter().map(|&i| items[i].score).collect::<Vec<_>>())?)
}

/// One chunk-level prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub video_id: String,
    pub chunk: usize,
    pub split: String,
    pub score: f64,
    pub target: f64,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<PredictionRow>, _>>()?;
    if rows.is_empty() {
        return Err(kineme::Error::EmptyFile(path.to_path_buf()).into());
    }
    Ok(rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
