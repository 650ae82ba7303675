//! Repeated k-fold cross-validation at the video level.
//!
//! Each repeat shuffles the videos into folds; each fold is tested once with
//! a model trained on the remaining folds, a fraction of which is held out
//! for validation (early stopping and the fusion weight). All chunks of a
//! video stay on the same side of every split.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{ChunkFeatures, VideoItem};
use crate::analytics::{
    aggregate_video, binarize_with, eval_metrics, fuse_decisions, median, MetricsReport, PcaLinReg, RunMetrics, Task,
};
use crate::error::{Error, Result};
use crate::predictors::{
    seqnet_train, Example, HeadKind, HmmClassifier, HmmConfig, LossKind, SeqInput, SeqNet, SeqNetSpec, TrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// One HMM per class over kineme sequences.
    Hmm,
    LstmKin,
    LstmAu,
    /// Kineme and AU branches merged inside one network.
    LstmFf,
    /// Separate kineme and AU networks combined by a validated weight.
    LstmDf,
    PcaLinReg,
    /// Predicts the training mean (regression) or majority class.
    Constant,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Hmm,
        ModelKind::LstmKin,
        ModelKind::LstmAu,
        ModelKind::LstmFf,
        ModelKind::LstmDf,
        ModelKind::PcaLinReg,
        ModelKind::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Hmm => "hmm",
            ModelKind::LstmKin => "lstm_kin",
            ModelKind::LstmAu => "lstm_au",
            ModelKind::LstmFf => "lstm_ff",
            ModelKind::LstmDf => "lstm_df",
            ModelKind::PcaLinReg => "pca_linreg",
            ModelKind::Constant => "constant",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossvalConfig {
    pub folds: usize,
    pub repeats: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub task: Task,
    pub model: ModelKind,
    pub hmm: HmmConfig,
    pub train: TrainConfig,
    pub variance_kept: f64,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig {
            folds: 10,
            repeats: 5,
            val_fraction: 0.10,
            seed: 0,
            task: Task::Classification,
            model: ModelKind::Hmm,
            hmm: HmmConfig::default(),
            train: TrainConfig::default(),
            variance_kept: crate::analytics::pca::DEFAULT_VARIANCE_KEPT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// Median used to binarize this run's labels.
    pub median: f64,
    pub alpha: Option<f64>,
    pub chunk: RunMetrics,
    pub video: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub model: ModelKind,
    pub task: Task,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub runs: Vec<RunRecord>,
    pub chunk: MetricsReport,
    pub video: MetricsReport,
}

/// Fold index of every video for one repeat.
pub fn fold_assignment(n_videos: usize, folds: usize, seed: u64, repeat: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repeat as u64);
    let mut order: Vec<usize> = (0..n_videos).collect();
    order.shuffle(&mut rng);
    let mut fold = vec![0; n_videos];
    for (pos, &v) in order.iter().enumerate() {
        fold[v] = pos % folds;
    }
    fold
}

fn run_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((repeat as u64) << 32 | fold as u64)
}

/// A chunk with the target inherited from its video.
struct Sample<'a> {
    features: &'a ChunkFeatures,
    target: f64,
}

fn samples<'a>(items: &'a [VideoItem], ids: &[usize], targets: &[f64]) -> Vec<Sample<'a>> {
    ids.iter()
        .flat_map(|&v| items[v].chunks.iter().map(move |c| Sample { features: c, target: targets[v] }))
        .collect()
}

struct ModelInputs<'a, 'b> {
    train: &'b [Sample<'a>],
    val: &'b [Sample<'a>],
    test: &'b [Sample<'a>],
    k: usize,
    task: Task,
    seed: u64,
}

fn examples(spec: &SeqNetSpec, s: &[Sample<'_>], k: usize) -> Vec<Example> {
    s.iter()
        .map(|s| Example {
            input: SeqInput {
                kineme: spec.kineme.map(|_| SeqInput::one_hot(&s.features.kinemes, k)),
                au: spec.au.map(|_| SeqInput::au_rows(&s.features.aus)),
            },
            target: s.target,
        })
        .collect()
}

fn lstm_scores(spec: SeqNetSpec, inp: &ModelInputs<'_, '_>, cfg: &TrainConfig, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let train = examples(&spec, inp.train, inp.k);
    let val = examples(&spec, inp.val, inp.k);
    let test = examples(&spec, inp.test, inp.k);
    let cfg = TrainConfig { loss: LossKind::for_head(spec.head), seed, ..*cfg };
    let net = SeqNet::new(spec, seed)?;
    let out = seqnet_train(net, &train, (!val.is_empty()).then_some(&val[..]), &cfg)?;
    let score = |ex: &[Example]| ex.iter().map(|e| out.net.score(&e.input)).collect::<Result<Vec<_>>>();
    Ok((score(&val)?, score(&test)?))
}

fn pose_matrix(s: &[Sample<'_>]) -> Result<DMatrix<f64>> {
    let width = s.first().map_or(0, |s| s.features.pose.len());
    if let Some(bad) = s.iter().find(|s| s.features.pose.len() != width) {
        return Err(Error::WidthMismatch { expected: width, got: bad.features.pose.len() });
    }
    Ok(DMatrix::from_row_iterator(s.len(), width, s.iter().flat_map(|s| s.features.pose.iter().copied())))
}

/// Test-chunk scores and, for decision fusion, the chosen weight.
fn fit_predict(model: ModelKind, inp: &ModelInputs<'_, '_>, cfg: &CrossvalConfig) -> Result<(Vec<f64>, Option<f64>)> {
    let head = match inp.task {
        Task::Regression => HeadKind::Regression,
        Task::Classification => HeadKind::Classification,
    };
    match model {
        ModelKind::Constant => {
            let mean = inp.train.iter().map(|s| s.target).sum::<f64>() / inp.train.len() as f64;
            let value = match inp.task {
                Task::Regression => mean,
                Task::Classification => (mean > 0.5) as u8 as f64,
            };
            Ok((vec![value; inp.test.len()], None))
        }
        ModelKind::Hmm => {
            if inp.task == Task::Regression {
                return Err(Error::InvalidConfig("the HMM model only supports classification".into()));
            }
            let seqs: Vec<&[usize]> = inp.train.iter().map(|s| s.features.kinemes.as_slice()).collect();
            let labels: Vec<_> = inp.train.iter().map(|s| crate::analytics::Label::from_score(s.target)).collect();
            let clf = HmmClassifier::fit(&seqs, &labels, inp.k, &HmmConfig { seed: inp.seed, ..cfg.hmm })?;
            let scores = inp.test.iter().map(|s| clf.score(&s.features.kinemes)).collect::<Result<Vec<_>>>()?;
            Ok((scores, None))
        }
        ModelKind::PcaLinReg => {
            let targets: Vec<f64> = inp.train.iter().map(|s| s.target).collect();
            let pca = PcaLinReg::fit(&pose_matrix(inp.train)?, &targets, cfg.variance_kept)?;
            let pred = pca.predict(&pose_matrix(inp.test)?)?;
            Ok((pred.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(), None))
        }
        ModelKind::LstmKin => Ok((lstm_scores(SeqNetSpec::kineme(inp.k, head), inp, &cfg.train, inp.seed)?.1, None)),
        ModelKind::LstmAu => Ok((lstm_scores(SeqNetSpec::au(head), inp, &cfg.train, inp.seed)?.1, None)),
        ModelKind::LstmFf => Ok((lstm_scores(SeqNetSpec::fusion(inp.k, head), inp, &cfg.train, inp.seed)?.1, None)),
        ModelKind::LstmDf => {
            let (val_kin, test_kin) = lstm_scores(SeqNetSpec::kineme(inp.k, head), inp, &cfg.train, inp.seed)?;
            let (val_au, test_au) = lstm_scores(SeqNetSpec::au(head), inp, &cfg.train, inp.seed.wrapping_add(1))?;
            if inp.val.is_empty() {
                return Err(Error::InvalidConfig("decision fusion needs a validation split".into()));
            }
            let reference: Vec<f64> = inp.val.iter().map(|s| s.target).collect();
            let fused = fuse_decisions(&val_kin, &val_au, &reference, &test_kin, &test_au, inp.task)?;
            Ok((fused.test_scores, Some(fused.alpha)))
        }
    }
}

fn one_run(items: &[VideoItem], k: usize, cfg: &CrossvalConfig, repeat: usize, fold: usize, folds: &[usize]) -> Result<RunRecord> {
    let seed = run_seed(cfg.seed, repeat, fold);
    let test: Vec<usize> = (0..items.len()).filter(|&v| folds[v] == fold).collect();
    let mut rest: Vec<usize> = (0..items.len()).filter(|&v| folds[v] != fold).collect();

    let scores: Vec<f64> = rest.iter().map(|&v| items[v].score).collect();
    let threshold = median(&scores)?;
    let targets: Vec<f64> = match cfg.task {
        Task::Regression => items.iter().map(|v| v.score).collect(),
        Task::Classification => binarize_with(&items.iter().map(|v| v.score).collect::<Vec<_>>(), threshold)
            .into_iter()
            .map(|l| l.as_f64())
            .collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rest.shuffle(&mut rng);
    let n_val = if cfg.val_fraction > 0.0 {
        ((cfg.val_fraction * rest.len() as f64).ceil() as usize).clamp(1, rest.len() - 1)
    } else {
        0
    };
    let val = rest.split_off(rest.len() - n_val);
    let mut train = rest;
    train.sort_unstable();
    let mut val = val;
    val.sort_unstable();

    let test_set: HashSet<usize> = test.iter().copied().collect();
    assert!(
        train.iter().chain(&val).all(|v| !test_set.contains(v)),
        "video appears in both training and test of repeat {repeat}, fold {fold}"
    );

    let train_s = samples(items, &train, &targets);
    let val_s = samples(items, &val, &targets);
    let test_s = samples(items, &test, &targets);
    if train_s.is_empty() || test_s.is_empty() {
        return Err(Error::EmptyInput);
    }
    let inp = ModelInputs { train: &train_s, val: &val_s, test: &test_s, k, task: cfg.task, seed };
    let (pred, alpha) = fit_predict(cfg.model, &inp, cfg)?;

    let truth: Vec<f64> = test_s.iter().map(|s| s.target).collect();
    let chunk = eval_metrics(&pred, &truth, cfg.task)?;
    let mut video_pred = Vec::new();
    let mut video_truth = Vec::new();
    let mut at = 0;
    for &v in &test {
        let n = items[v].chunks.len();
        if n > 0 {
            video_pred.push(aggregate_video(&pred[at..at + n], cfg.task)?);
            video_truth.push(targets[v]);
        }
        at += n;
    }
    let video = eval_metrics(&video_pred, &video_truth, cfg.task)?;
    let ids = |v: &[usize]| v.iter().map(|&i| items[i].video_id.clone()).collect();
    Ok(RunRecord {
        repeat,
        fold,
        seed,
        train_ids: ids(&train),
        val_ids: ids(&val),
        test_ids: ids(&test),
        median: threshold,
        alpha,
        chunk,
        video,
    })
}

/// Runs `repeats × folds` train/test rounds; results are ordered by
/// (repeat, fold) whatever order they finish in.
pub fn run_crossval(items: &[VideoItem], k: usize, cfg: &CrossvalConfig) -> Result<CrossvalReport> {
    if cfg.folds < 2 || cfg.repeats == 0 {
        return Err(Error::InvalidConfig("need at least 2 folds and 1 repeat".into()));
    }
    if !(0.0..0.5).contains(&cfg.val_fraction) {
        return Err(Error::InvalidConfig(format!("validation fraction {} outside [0, 0.5)", cfg.val_fraction)));
    }
    if items.len() < cfg.folds {
        return Err(Error::TooFewVideos { got: items.len(), needed: cfg.folds });
    }
    let assignments: Vec<Vec<usize>> = (0..cfg.repeats).map(|r| fold_assignment(items.len(), cfg.folds, cfg.seed, r)).collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.repeats).flat_map(|r| (0..cfg.folds).map(move |f| (r, f))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(r, f)| one_run(items, k, cfg, r, f, &assignments[r]))
        .collect::<Result<Vec<_>>>()?;
    let chunk = MetricsReport::from_runs(cfg.task, &runs.iter().map(|r| r.chunk).collect::<Vec<_>>());
    let video = MetricsReport::from_runs(cfg.task, &runs.iter().map(|r| r.video).collect::<Vec<_>>());
    Ok(CrossvalReport { model: cfg.model, task: cfg.task, folds: cfg.folds, repeats: cfg.repeats, seed: cfg.seed, runs, chunk, video })
}
