//! Late fusion of kineme and AU predictor scores: `α·p_kin + (1 − α)·p_au`
//! with α picked on a 0.01 grid by validation PCC (regression) or F1
//! (classification).

use serde::{Deserialize, Serialize};

use super::metrics::{eval_metrics, Task};
use crate::error::{Error, Result};

pub const ALPHA_STEPS: usize = 100;

/// Metric gains smaller than this count as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub alpha: f64,
    /// Grid index, `alpha == index / 100`.
    pub alpha_index: usize,
    pub val_metric: f64,
    pub val_metric_kin: f64,
    pub val_metric_au: f64,
    pub test_scores: Vec<f64>,
}

fn blend(alpha: f64, kin: &[f64], au: &[f64]) -> Vec<f64> {
    kin.iter().zip(au).map(|(k, a)| alpha * k + (1.0 - alpha) * a).collect()
}

fn selection_metric(scores: &[f64], reference: &[f64], task: Task) -> Result<f64> {
    let m = eval_metrics(scores, reference, task)?;
    Ok(match task {
        Task::Regression => m.pcc.unwrap_or(0.0),
        Task::Classification => m.f1.unwrap_or(0.0),
    })
}

/// Grid-searches α on the validation scores and applies it to the test scores.
/// Ties resolve to the smallest α.
pub fn fuse_decisions(
    val_kin: &[f64],
    val_au: &[f64],
    val_reference: &[f64],
    test_kin: &[f64],
    test_au: &[f64],
    task: Task,
) -> Result<FusionResult> {
    if val_kin.len() != val_au.len() {
        return Err(Error::LengthMismatch { left: val_kin.len(), right: val_au.len() });
    }
    if val_kin.len() != val_reference.len() {
        return Err(Error::LengthMismatch { left: val_kin.len(), right: val_reference.len() });
    }
    if test_kin.len() != test_au.len() {
        return Err(Error::LengthMismatch { left: test_kin.len(), right: test_au.len() });
    }
    let mut best_idx = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=ALPHA_STEPS {
        let alpha = i as f64 / ALPHA_STEPS as f64;
        let m = selection_metric(&blend(alpha, val_kin, val_au), val_reference, task)?;
        if m > best + TIE_EPS {
            best = m;
            best_idx = i;
        }
    }
    let alpha = best_idx as f64 / ALPHA_STEPS as f64;
    Ok(FusionResult {
        alpha,
        alpha_index: best_idx,
        val_metric: best,
        val_metric_kin: selection_metric(val_kin, val_reference, task)?,
        val_metric_au: selection_metric(val_au, val_reference, task)?,
        test_scores: blend(alpha, test_kin, test_au),
    })
}
