//! Labels, metrics, chunk aggregation, decision fusion, the PCA regression
//! baseline and percentile-based explanation reports.

pub mod aggregate;
pub mod explain;
pub mod fusion;
pub mod labels;
pub mod matching;
pub mod metrics;
pub mod pca;

pub use aggregate::aggregate_video;
pub use explain::{percentile_explain, ExplainReport, ExplainRow, ExplainVideo};
pub use fusion::{fuse_decisions, FusionResult};
pub use labels::{binarize_median, binarize_with, median, Label, TraitLabels};
pub use metrics::{eval_metrics, metrics_table, pcc, MetricStat, MetricsReport, RunMetrics, Task};
pub use pca::PcaLinReg;
pub use matching::{matched_accuracy, MatchedAccuracy};
