use std::path::Path;

use serde::{Deserialize, Serialize};

use super::crossval::CrossvalConfig;
use super::dataset::FeatureConfig;
use super::openface::ColumnConfig;
use crate::codebook::KinemeConfig;
use crate::error::Result;

/// Everything a run needs, loadable from one JSON file. Missing sections
/// take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub kineme: KinemeConfig,
    pub columns: ColumnConfig,
    pub features: FeatureConfig,
    pub crossval: CrossvalConfig,
    pub explain: ExplainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub percentile: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { percentile: 10.0 }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Applies one seed to every randomized stage.
    pub fn with_seed(mut self, seed: u64) -> PipelineConfig {
        self.kineme.seed = seed;
        self.crossval.seed = seed;
        self
    }
}
