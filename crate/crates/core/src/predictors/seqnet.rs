//! Small LSTM over per-window symbol vectors.
//!
//! One recurrent branch for kineme one-hot inputs, one for AU dominance
//! vectors, or both (feature fusion): the final hidden states are
//! concatenated, passed through dropout and a dense head. The classification
//! head has two sigmoid units trained with summed binary cross-entropy; the
//! regression head is a single linear unit trained with mean absolute error.
//!
//! All parameters live in one flat vector; [`ParamLayout`] names the slices.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_units::AU_COUNT;
use crate::error::{Error, Result};

pub const SEQNET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Classification,
    Regression,
}

impl HeadKind {
    pub fn outputs(self) -> usize {
        match self {
            HeadKind::Classification => 2,
            HeadKind::Regression => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            HeadKind::Classification => "classification",
            HeadKind::Regression => "regression",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeqNetSpec {
    pub kineme: Option<BranchSpec>,
    pub au: Option<BranchSpec>,
    pub head: HeadKind,
    pub dropout: f64,
}

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_DROPOUT: f64 = 0.2;

impl SeqNetSpec {
    /// Kineme-only network over a `k`-symbol vocabulary.
    pub fn kineme(k: usize, head: HeadKind) -> Self {
        SeqNetSpec {
            kineme: Some(BranchSpec { input: k, hidden: DEFAULT_HIDDEN }),
            au: None,
            head,
            dropout: DEFAULT_DROPOUT,
        }
    }

    pub fn au(head: HeadKind) -> Self {
        SeqNetSpec {
            kineme: None,
            au: Some(BranchSpec { input: AU_COUNT, hidden: DEFAULT_HIDDEN }),
            head,
            dropout: DEFAULT_DROPOUT,
        }
    }

    /// Both branches, merged before the head.
    pub fn fusion(k: usize, head: HeadKind) -> Self {
        SeqNetSpec {
            kineme: Some(BranchSpec { input: k, hidden: DEFAULT_HIDDEN }),
            au: Some(BranchSpec { input: AU_COUNT, hidden: DEFAULT_HIDDEN }),
            head,
            dropout: DEFAULT_DROPOUT,
        }
    }

    /// Width of the merged hidden representation feeding the head.
    pub fn merged_width(&self) -> usize {
        self.kineme.map_or(0, |b| b.hidden) + self.au.map_or(0, |b| b.hidden)
    }

    fn validate(&self) -> Result<()> {
        if self.kineme.is_none() && self.au.is_none() {
            return Err(Error::InvalidConfig("network needs at least one branch".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        for b in [self.kineme, self.au].into_iter().flatten() {
            if b.input == 0 || b.hidden == 0 {
                return Err(Error::InvalidConfig("branch widths must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BranchLayout {
    spec: BranchSpec,
    w: usize,
    u: usize,
    b: usize,
}

impl BranchLayout {
    fn new(spec: BranchSpec, offset: &mut usize) -> Self {
        let h4 = 4 * spec.hidden;
        let w = *offset;
        let u = w + h4 * spec.input;
        let b = u + h4 * spec.hidden;
        *offset = b + h4;
        BranchLayout { spec, w, u, b }
    }
}

/// Offsets of every parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    kineme: Option<BranchLayout>,
    au: Option<BranchLayout>,
    head_w: usize,
    head_b: usize,
    total: usize,
    outputs: usize,
    merged: usize,
}

impl ParamLayout {
    fn new(spec: &SeqNetSpec) -> Self {
        let mut off = 0;
        let kineme = spec.kineme.map(|b| BranchLayout::new(b, &mut off));
        let au = spec.au.map(|b| BranchLayout::new(b, &mut off));
        let merged = spec.merged_width();
        let outputs = spec.head.outputs();
        let head_w = off;
        let head_b = head_w + outputs * merged;
        let total = head_b + outputs;
        ParamLayout { kineme, au, head_w, head_b, total, outputs, merged }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Named parameter tensors and their ranges.
    pub fn groups(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (name, br) in [("kineme", &self.kineme), ("au", &self.au)] {
            if let Some(br) = br {
                let h4 = 4 * br.spec.hidden;
                out.push((format!("{name}.input_weights"), br.w..br.w + h4 * br.spec.input));
                out.push((format!("{name}.recurrent_weights"), br.u..br.u + h4 * br.spec.hidden));
                out.push((format!("{name}.bias"), br.b..br.b + h4));
            }
        }
        out.push(("head.weights".into(), self.head_w..self.head_b));
        out.push(("head.bias".into(), self.head_b..self.total));
        out
    }
}

/// One example's inputs: `T × width` per branch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeqInput {
    pub kineme: Option<Vec<Vec<f64>>>,
    pub au: Option<Vec<Vec<f64>>>,
}

impl SeqInput {
    /// One-hot encodes 1-based kineme symbols.
    pub fn one_hot(symbols: &[usize], k: usize) -> Vec<Vec<f64>> {
        symbols
            .iter()
            .map(|&s| (1..=k).map(|j| if j == s { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    pub fn au_rows(dominance: &[[u8; AU_COUNT]]) -> Vec<Vec<f64>> {
        dominance.iter().map(|d| d.iter().map(|&v| v as f64).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: SeqInput,
    /// Class label (0/1) or regression score in [0, 1].
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    BinaryCrossEntropy,
    MeanAbsoluteError,
}

impl LossKind {
    fn name(self) -> &'static str {
        match self {
            LossKind::BinaryCrossEntropy => "binary_cross_entropy",
            LossKind::MeanAbsoluteError => "mean_absolute_error",
        }
    }

    pub fn for_head(head: HeadKind) -> Self {
        match head {
            HeadKind::Classification => LossKind::BinaryCrossEntropy,
            HeadKind::Regression => LossKind::MeanAbsoluteError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::BinaryCrossEntropy,
            epochs: 100,
            batch_size: 32,
            patience: 10,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: SeqNet,
    pub trace: Vec<EpochLoss>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
}

/// Fixed dropout mask over the merged hidden units (already scaled).
pub type DropoutMask = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SeqNet {
    pub spec: SeqNetSpec,
    pub params: Vec<f64>,
    layout: ParamLayout,
}

struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct BranchTrace {
    steps: Vec<StepCache>,
    h: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SeqNet {
    /// Glorot-uniform weights, zero biases except forget gates at 1.
    pub fn new(spec: SeqNetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = ParamLayout::new(&spec);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in slice {
                *p = rng.random_range(-a..a);
            }
        };
        for br in [&layout.kineme, &layout.au].into_iter().flatten() {
            let (i, h) = (br.spec.input, br.spec.hidden);
            glorot(&mut params[br.w..br.u], i, 4 * h);
            glorot(&mut params[br.u..br.b], h, 4 * h);
            for p in &mut params[br.b + h..br.b + 2 * h] {
                *p = 1.0;
            }
        }
        glorot(&mut params[layout.head_w..layout.head_b], layout.merged, layout.outputs);
        Ok(SeqNet { spec, params, layout })
    }

    pub fn from_params(spec: SeqNetSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = ParamLayout::new(&spec);
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch { expected: layout.total, got: params.len() });
        }
        Ok(SeqNet { spec, params, layout })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn check_input(&self, input: &SeqInput) -> Result<()> {
        for (spec, data) in [(&self.spec.kineme, &input.kineme), (&self.spec.au, &input.au)] {
            match (spec, data) {
                (Some(s), Some(rows)) => {
                    if let Some(r) = rows.iter().find(|r| r.len() != s.input) {
                        return Err(Error::WidthMismatch { expected: s.input, got: r.len() });
                    }
                }
                (Some(s), None) => return Err(Error::WidthMismatch { expected: s.input, got: 0 }),
                (None, Some(rows)) if !rows.is_empty() => {
                    return Err(Error::WidthMismatch { expected: 0, got: rows[0].len() })
                }
                _ => {}
            }
        }
        if let (Some(_), Some(_), Some(a), Some(b)) = (&self.spec.kineme, &self.spec.au, &input.kineme, &input.au) {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
            }
        }
        Ok(())
    }

    fn run_branch(&self, br: &BranchLayout, rows: &[Vec<f64>], keep: bool) -> BranchTrace {
        let (ni, nh) = (br.spec.input, br.spec.hidden);
        let w = &self.params[br.w..br.u];
        let u = &self.params[br.u..br.b];
        let bias = &self.params[br.b..br.b + 4 * nh];
        let mut h = vec![0.0; nh];
        let mut c = vec![0.0; nh];
        let mut steps = Vec::with_capacity(if keep { rows.len() } else { 0 });
        for x in rows {
            let mut z = bias.to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let wr = &w[r * ni..(r + 1) * ni];
                let ur = &u[r * nh..(r + 1) * nh];
                let mut acc = 0.0;
                for (a, b) in wr.iter().zip(x) {
                    acc += a * b;
                }
                for (a, b) in ur.iter().zip(&h) {
                    acc += a * b;
                }
                *zr += acc;
            }
            let mut gates = vec![0.0; 4 * nh];
            for j in 0..nh {
                gates[j] = sigmoid(z[j]);
                gates[nh + j] = sigmoid(z[nh + j]);
                gates[2 * nh + j] = sigmoid(z[2 * nh + j]);
                gates[3 * nh + j] = z[3 * nh + j].tanh();
            }
            let c_prev = std::mem::take(&mut c);
            let h_prev = std::mem::take(&mut h);
            c = (0..nh).map(|j| gates[nh + j] * c_prev[j] + gates[j] * gates[3 * nh + j]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            h = (0..nh).map(|j| gates[2 * nh + j] * tanh_c[j]).collect();
            if keep {
                steps.push(StepCache { x: x.clone(), h_prev, c_prev, gates, tanh_c });
            }
        }
        BranchTrace { steps, h }
    }

    fn merged(&self, input: &SeqInput, keep: bool) -> (Option<BranchTrace>, Option<BranchTrace>, Vec<f64>) {
        let empty: Vec<Vec<f64>> = Vec::new();
        let kin = self
            .layout
            .kineme
            .as_ref()
            .map(|br| self.run_branch(br, input.kineme.as_ref().unwrap_or(&empty), keep));
        let au = self
            .layout
            .au
            .as_ref()
            .map(|br| self.run_branch(br, input.au.as_ref().unwrap_or(&empty), keep));
        let mut merged = Vec::with_capacity(self.layout.merged);
        if let Some(t) = &kin {
            merged.extend_from_slice(&t.h);
        }
        if let Some(t) = &au {
            merged.extend_from_slice(&t.h);
        }
        (kin, au, merged)
    }

    fn head(&self, features: &[f64]) -> Vec<f64> {
        let m = self.layout.merged;
        (0..self.layout.outputs)
            .map(|o| {
                let w = &self.params[self.layout.head_w + o * m..self.layout.head_w + (o + 1) * m];
                let z = self.params[self.layout.head_b + o] + w.iter().zip(features).map(|(a, b)| a * b).sum::<f64>();
                match self.spec.head {
                    HeadKind::Classification => sigmoid(z),
                    HeadKind::Regression => z,
                }
            })
            .collect()
    }

    /// Inference-mode outputs (no dropout).
    pub fn forward(&self, input: &SeqInput) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let (_, _, merged) = self.merged(input, false);
        Ok(self.head(&merged))
    }

    /// Score in [0, 1]: `P(High)` for classification, the regressed value otherwise.
    pub fn score(&self, input: &SeqInput) -> Result<f64> {
        let out = self.forward(input)?;
        Ok(match self.spec.head {
            HeadKind::Classification => {
                let s = out[0] + out[1];
                if s > 0.0 {
                    out[1] / s
                } else {
                    0.5
                }
            }
            HeadKind::Regression => out[0],
        })
    }

    fn example_loss(&self, outputs: &[f64], target: f64, loss: LossKind) -> (f64, Vec<f64>) {
        match loss {
            LossKind::BinaryCrossEntropy => {
                let targets = [1.0 - target, target];
                let mut l = 0.0;
                let mut dz = vec![0.0; 2];
                for k in 0..2 {
                    let y = outputs[k].clamp(1e-12, 1.0 - 1e-12);
                    l -= targets[k] * y.ln() + (1.0 - targets[k]) * (1.0 - y).ln();
                    dz[k] = outputs[k] - targets[k];
                }
                (l, dz)
            }
            LossKind::MeanAbsoluteError => {
                let d = outputs[0] - target;
                (d.abs(), vec![if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 }])
            }
        }
    }

    /// Loss of one example without dropout.
    pub fn loss(&self, ex: &Example, loss: LossKind) -> Result<f64> {
        self.check_loss(loss)?;
        let out = self.forward(&ex.input)?;
        Ok(self.example_loss(&out, ex.target, loss).0)
    }

    fn check_loss(&self, loss: LossKind) -> Result<()> {
        if LossKind::for_head(self.spec.head) != loss {
            return Err(Error::LossHeadMismatch { loss: loss.name(), head: self.spec.head.name() });
        }
        Ok(())
    }

    /// Loss and gradient for one example. `mask` multiplies the merged
    /// hidden vector; `None` means no dropout.
    pub fn loss_and_gradient(&self, ex: &Example, loss: LossKind, mask: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        self.check_loss(loss)?;
        self.check_input(&ex.input)?;
        let (kin, au, merged) = self.merged(&ex.input, true);
        let features: Vec<f64> = match mask {
            Some(m) => merged.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => merged.clone(),
        };
        let out = self.head(&features);
        let (l, dz) = self.example_loss(&out, ex.target, loss);

        let mut grad = vec![0.0; self.layout.total];
        let m = self.layout.merged;
        let mut d_features = vec![0.0; m];
        for (o, dzo) in dz.iter().enumerate() {
            grad[self.layout.head_b + o] += dzo;
            let wo = self.layout.head_w + o * m;
            for j in 0..m {
                grad[wo + j] += dzo * features[j];
                d_features[j] += dzo * self.params[wo + j];
            }
        }
        if let Some(mask) = mask {
            d_features.iter_mut().zip(mask).for_each(|(d, k)| *d *= k);
        }
        let mut off = 0;
        if let (Some(br), Some(tr)) = (&self.layout.kineme, &kin) {
            self.backprop_branch(br, tr, &d_features[off..off + br.spec.hidden], &mut grad);
            off += br.spec.hidden;
        }
        if let (Some(br), Some(tr)) = (&self.layout.au, &au) {
            self.backprop_branch(br, tr, &d_features[off..off + br.spec.hidden], &mut grad);
        }
        Ok((l, grad))
    }

    fn backprop_branch(&self, br: &BranchLayout, tr: &BranchTrace, dh_last: &[f64], grad: &mut [f64]) {
        let (ni, nh) = (br.spec.input, br.spec.hidden);
        let u = &self.params[br.u..br.b];
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; nh];
        let mut dz = vec![0.0; 4 * nh];
        for step in tr.steps.iter().rev() {
            let g = &step.gates;
            for j in 0..nh {
                let (gi, gf, go, gg) = (g[j], g[nh + j], g[2 * nh + j], g[3 * nh + j]);
                let tc = step.tanh_c[j];
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * go * (1.0 - tc * tc);
                let d_i = dc[j] * gg;
                let d_g = dc[j] * gi;
                let d_f = dc[j] * step.c_prev[j];
                dz[j] = d_i * gi * (1.0 - gi);
                dz[nh + j] = d_f * gf * (1.0 - gf);
                dz[2 * nh + j] = d_o * go * (1.0 - go);
                dz[3 * nh + j] = d_g * (1.0 - gg * gg);
                dc[j] *= gf;
            }
            let mut dh_prev = vec![0.0; nh];
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                grad[br.b + r] += dzr;
                let gw = &mut grad[br.w + r * ni..br.w + (r + 1) * ni];
                for (gw, x) in gw.iter_mut().zip(&step.x) {
                    *gw += dzr * x;
                }
                let gu = br.u + r * nh;
                for k in 0..nh {
                    grad[gu + k] += dzr * step.h_prev[k];
                    dh_prev[k] += dzr * u[r * nh + k];
                }
            }
            dh = dh_prev;
        }
    }

    /// Mean inference-mode loss over a set of examples.
    pub fn mean_loss(&self, examples: &[Example], loss: LossKind) -> Result<f64> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let total = examples
            .par_iter()
            .map(|e| self.loss(e, loss))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum::<f64>();
        Ok(total / examples.len() as f64)
    }

    pub fn to_checkpoint(&self) -> SeqNetCheckpoint {
        SeqNetCheckpoint { version: SEQNET_VERSION, spec: self.spec, params: self.params.clone() }
    }

    pub fn from_checkpoint(ck: &SeqNetCheckpoint) -> Result<Self> {
        if ck.version != SEQNET_VERSION {
            return Err(Error::UnsupportedVersion(ck.version));
        }
        SeqNet::from_params(ck.spec, ck.params.clone())
    }
}

/// Versioned JSON form: architecture plus the flat parameter array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqNetCheckpoint {
    pub version: u32,
    pub spec: SeqNetSpec,
    pub params: Vec<f64>,
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-7, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Mini-batch BPTT with Adam; early stopping on validation loss when a
/// validation set is given. The best-validation weights are returned.
pub fn seqnet_train(net: SeqNet, train: &[Example], val: Option<&[Example]>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    net.check_loss(cfg.loss)?;
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("epochs and batch size must be positive".into()));
    }
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    for ex in train.iter().chain(val.unwrap_or(&[])) {
        let ok = match net.spec.head {
            HeadKind::Classification => ex.target == 0.0 || ex.target == 1.0,
            HeadKind::Regression => (0.0..=1.0).contains(&ex.target),
        };
        if !ok {
            return Err(Error::InvalidConfig(format!("target {} invalid for {} head", ex.target, net.spec.head.name())));
        }
        net.check_input(&ex.input)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = net;
    let mut adam = Adam::new(net.params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let keep = 1.0 - net.spec.dropout;
    let m = net.layout.merged;
    let val = val.filter(|v| !v.is_empty());

    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            // masks drawn sequentially so results do not depend on thread scheduling
            let masks: Vec<Option<Vec<f64>>> = batch
                .iter()
                .map(|_| {
                    (net.spec.dropout > 0.0)
                        .then(|| (0..m).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect())
                })
                .collect();
            let grads = batch
                .par_iter()
                .zip(masks.par_iter())
                .map(|(&i, mask)| net.loss_and_gradient(&train[i], cfg.loss, mask.as_deref()).map(|(_, g)| g))
                .collect::<Result<Vec<_>>>()?;
            let mut total = vec![0.0; net.params.len()];
            for g in &grads {
                total.iter_mut().zip(g).for_each(|(t, v)| *t += v);
            }
            let scale = 1.0 / batch.len() as f64;
            total.iter_mut().for_each(|t| *t *= scale);
            adam.step(&mut net.params, &total);
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite network parameters".into()));
        }

        let train_loss = net.mean_loss(train, cfg.loss)?;
        let val_loss = val.map(|v| net.mean_loss(v, cfg.loss)).transpose()?;
        trace.push(EpochLoss { epoch, train_loss, val_loss });
        if let Some(vl) = val_loss {
            if best.as_ref().is_none_or(|(b, _, _)| vl < *b) {
                best = Some((vl, net.params.clone(), epoch));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    let best_epoch = match best {
        Some((_, params, epoch)) => {
            net.params = params;
            epoch
        }
        None => trace.len(),
    };
    Ok(TrainOutcome { net, trace, best_epoch })
}
