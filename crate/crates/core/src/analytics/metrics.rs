//! Regression accuracy (1 − MAE), Pearson correlation, classification
//! accuracy and F1, plus mean ± std summaries over repeated runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::labels::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Pearson correlation. Returns `(0.0, true)` if either side has zero variance.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<(f64, bool)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Ok((0.0, true));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok((0.0, true));
    }
    Ok(((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0), false))
}

/// F1 with `positive` as the positive class; 0 when there are no true positives.
pub fn f1_score(pred: &[Label], truth: &[Label], positive: Label) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fneg = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        match (*p == positive, *t == positive) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (2.0 * tp + fp + fneg)
}

/// Metrics of a single evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub acc_reg: Option<f64>,
    pub pcc: Option<f64>,
    pub pcc_degenerate: bool,
    pub acc_cls: Option<f64>,
    /// F1 with `High` as the positive class.
    pub f1: Option<f64>,
    pub f1_macro: Option<f64>,
}

/// Scores predictions against ground truth.
///
/// Regression: both sides are trait scores. Classification: values are
/// turned into labels with [`Label::from_score`], so 0/1 labels and
/// probabilities both work.
pub fn eval_metrics(pred: &[f64], truth: &[f64], task: Task) -> Result<RunMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = pred.len() as f64;
    match task {
        Task::Regression => {
            let mae = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
            let (r, degenerate) = pcc(pred, truth)?;
            Ok(RunMetrics { acc_reg: Some(1.0 - mae), pcc: Some(r), pcc_degenerate: degenerate, ..Default::default() })
        }
        Task::Classification => {
            let p: Vec<Label> = pred.iter().map(|&v| Label::from_score(v)).collect();
            let t: Vec<Label> = truth.iter().map(|&v| Label::from_score(v)).collect();
            let correct = p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64;
            let f1 = f1_score(&p, &t, Label::High);
            let f1_low = f1_score(&p, &t, Label::Low);
            Ok(RunMetrics {
                acc_cls: Some(correct / n),
                f1: Some(f1),
                f1_macro: Some(0.5 * (f1 + f1_low)),
                ..Default::default()
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    /// Population standard deviation across runs.
    pub std: f64,
}

impl MetricStat {
    pub fn from_values(values: &[f64]) -> Option<MetricStat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        // shifting by the first value keeps identical runs at exactly zero spread
        let x0 = values[0];
        let shift = values.iter().map(|v| v - x0).sum::<f64>() / n;
        let var = values.iter().map(|v| (v - x0 - shift).powi(2)).sum::<f64>() / n;
        Some(MetricStat { mean: x0 + shift, std: var.sqrt() })
    }
}

impl std::fmt::Display for MetricStat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean, self.std)
    }
}

/// Mean ± std of each metric over `n_runs` evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub n_runs: usize,
    pub acc_reg: Option<MetricStat>,
    pub pcc: Option<MetricStat>,
    pub acc_cls: Option<MetricStat>,
    pub f1: Option<MetricStat>,
    pub f1_macro: Option<MetricStat>,
    /// Runs whose PCC was declared 0 because of zero variance.
    pub degenerate_pcc_runs: usize,
}

impl MetricsReport {
    pub fn from_runs(task: Task, runs: &[RunMetrics]) -> MetricsReport {
        let collect = |f: fn(&RunMetrics) -> Option<f64>| {
            MetricStat::from_values(&runs.iter().filter_map(f).collect::<Vec<_>>())
        };
        MetricsReport {
            task,
            n_runs: runs.len(),
            acc_reg: collect(|r| r.acc_reg),
            pcc: collect(|r| r.pcc),
            acc_cls: collect(|r| r.acc_cls),
            f1: collect(|r| r.f1),
            f1_macro: collect(|r| r.f1_macro),
            degenerate_pcc_runs: runs.iter().filter(|r| r.pcc_degenerate).count(),
        }
    }

    /// The two headline metrics for the task: (Acc, PCC) or (Acc, F1).
    pub fn headline(&self) -> (Option<MetricStat>, Option<MetricStat>) {
        match self.task {
            Task::Regression => (self.acc_reg, self.pcc),
            Task::Classification => (self.acc_cls, self.f1),
        }
    }

    pub const CSV_HEADER: &'static str =
        "label,task,n_runs,acc_reg_mean,acc_reg_std,pcc_mean,pcc_std,acc_cls_mean,acc_cls_std,f1_mean,f1_std,f1_macro_mean,f1_macro_std,degenerate_pcc_runs";

    pub fn csv_row(&self, label: &str) -> String {
        let cell = |s: Option<MetricStat>| match s {
            Some(s) => format!("{},{}", s.mean, s.std),
            None => ",".to_string(),
        };
        format!(
            "{label},{},{},{},{},{},{},{},{}",
            match self.task {
                Task::Regression => "regression",
                Task::Classification => "classification",
            },
            self.n_runs,
            cell(self.acc_reg),
            cell(self.pcc),
            cell(self.acc_cls),
            cell(self.f1),
            cell(self.f1_macro),
            self.degenerate_pcc_runs
        )
    }
}

/// Text table with one row per trait and an (Acc, PCC|F1) column pair per method.
pub fn metrics_table(methods: &[String], rows: &[(String, Vec<MetricsReport>)]) -> String {
    let task = rows.first().and_then(|(_, r)| r.first()).map_or(Task::Regression, |r| r.task);
    let second = match task {
        Task::Regression => "PCC",
        Task::Classification => "F1",
    };
    let width = 23;
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "Trait");
    for m in methods {
        let _ = write!(out, "| {:<width$}", m);
    }
    out.push('\n');
    let _ = write!(out, "{:<8}", "");
    for _ in methods {
        let _ = write!(out, "| {:<11} {:<11}", "Acc", second);
    }
    out.push('\n');
    for (name, reports) in rows {
        let _ = write!(out, "{:<8}", name);
        for r in reports {
            let (a, b) = r.headline();
            let fmt = |s: Option<MetricStat>| s.map_or("-".to_string(), |s| s.to_string());
            let _ = write!(out, "| {:<11} {:<11}", fmt(a), fmt(b));
        }
        out.push('\n');
    }
    out
}
