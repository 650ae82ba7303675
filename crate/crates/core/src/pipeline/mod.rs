//! Ingestion, dataset manifests, chunking, synthetic corpora and the
//! cross-validation harness.

pub mod chunk;
pub mod config;
pub mod crossval;
pub mod dataset;
pub mod manifest;
pub mod openface;
pub mod synth;

pub use chunk::{chunk_series, Chunk, ChunkSpec};
pub use config::{ExplainConfig, PipelineConfig};
pub use crossval::{fold_assignment, run_crossval, CrossvalConfig, CrossvalReport, ModelKind, RunRecord};
pub use dataset::{build_items, ChunkFeatures, FeatureConfig, VideoItem};
pub use manifest::{Manifest, VideoEntry};
pub use openface::{parse_openface_csv, ColumnConfig, FrameFeatures, LoadReport};
pub use synth::{synth_generate, window_truth, SynthConfig, SynthDataset};
