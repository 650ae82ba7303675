//! Synthetic corpora with planted kinemes, used as a ground-truth oracle.
//!
//! Kineme `1` is stillness; kineme `j > 1` is a sinusoid on channel
//! `(j − 2) mod 3` (pitch, yaw, roll) at harmonic `1 + (j − 2) / 3`. Every
//! pattern has period equal to the window step and is phase-locked to the
//! frame index, so a window lying inside a block sees exactly its pattern.
//! Block lengths are drawn in frames, so block edges do not line up with the
//! window grid and windows straddling two blocks vary continuously.
//! Blocks are chained by a Markov chain that each video tilts towards the
//! scoring symbols; a video's trait score is the fraction of its frames
//! showing those symbols.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, VideoEntry};
use super::openface::write_openface_csv;
use crate::action_units::{AUFrameTrack, AuFrame, AU_COUNT};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::mixture::{Covariance, GaussianMixture};
use crate::pose::{AngleTrajectory, ChannelOffsets, HeadPoseSeries, WindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub k: usize,
    pub n_videos: usize,
    pub duration_s: f64,
    pub fps: f64,
    pub window_s: f64,
    /// Peak angle of the moving kinemes, radians.
    pub amplitude: f64,
    /// Per-sample Gaussian pose noise, radians.
    pub noise_sigma: f64,
    /// Block length range, in window steps (fractional lengths occur).
    pub dwell_min: usize,
    pub dwell_max: usize,
    /// Kinemes whose frequency sets the trait score.
    pub score_symbols: Vec<usize>,
    pub traits: Vec<String>,
    pub au_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            k: 4,
            n_videos: 200,
            duration_s: 20.0,
            fps: 30.0,
            window_s: 2.0,
            amplitude: 0.2,
            noise_sigma: 0.005,
            dwell_min: 2,
            dwell_max: 4,
            score_symbols: vec![1, 2],
            traits: vec!["O".into()],
            au_noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k < 2 {
            return bad(format!("need at least 2 kinemes, got {}", self.k));
        }
        if !(self.noise_sigma >= 0.0) || !(self.au_noise >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        if self.dwell_min < 2 || self.dwell_max < self.dwell_min {
            return bad(format!("dwell range {}..={} must start at 2 or more", self.dwell_min, self.dwell_max));
        }
        if self.score_symbols.iter().any(|&s| s == 0 || s > self.k) {
            return bad("score symbols must lie in 1..=k".into());
        }
        if !self.window().len_frames.is_multiple_of(2) {
            return bad("window must span an even number of frames".into());
        }
        if !(self.fps > 0.0) || !(self.duration_s > 0.0) {
            return bad("fps and duration must be positive".into());
        }
        Ok(())
    }

    /// Half-overlapping windows, so the step is half a window.
    pub fn window(&self) -> WindowSpec {
        let len = (self.window_s * self.fps).round() as usize;
        WindowSpec { len_frames: len, step_frames: len / 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub pose: HeadPoseSeries,
    pub aus: AUFrameTrack,
    /// Planted symbol (1-based) of every frame.
    pub frame_symbols: Vec<usize>,
    pub scores: BTreeMap<String, f64>,
    pub propensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub planted: Vec<AngleTrajectory>,
    pub videos: Vec<SynthVideo>,
}

/// The angle pattern of kineme `j` (1-based) at absolute frame `f`.
fn pattern(j: usize, f: usize, period: usize, amplitude: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    if j > 1 {
        let harmonic = 1 + (j - 2) / 3;
        out[(j - 2) % 3] = amplitude * (TAU * (harmonic * f) as f64 / period as f64).sin();
    }
    out
}

/// AU channels made dominant by kineme `j`.
fn active_aus(j: usize) -> [usize; 2] {
    [(3 * j) % AU_COUNT, (3 * j + 7) % AU_COUNT]
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn generate_video(cfg: &SynthConfig, index: usize) -> Result<SynthVideo> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let period = cfg.window().step_frames;
    let n = (cfg.duration_s * cfg.fps).round() as usize;
    let propensity: f64 = rng.random();
    let weight = |s: usize| {
        let w = if cfg.score_symbols.contains(&s) { propensity } else { 1.0 - propensity };
        w.max(1e-3)
    };

    let mut frame_symbols = Vec::with_capacity(n);
    let mut current = 1 + pick(&mut rng, &(1..=cfg.k).map(weight).collect::<Vec<_>>());
    while frame_symbols.len() < n {
        let len = rng.random_range(cfg.dwell_min * period..=cfg.dwell_max * period);
        let len = len.min(n - frame_symbols.len());
        frame_symbols.extend(std::iter::repeat_n(current, len));
        let w: Vec<f64> = (1..=cfg.k).map(|s| if s == current { 0.0 } else { weight(s) }).collect();
        current = 1 + pick(&mut rng, &w);
    }

    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let au_noise = Normal::new(0.0, cfg.au_noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut channels = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut frames: Vec<AuFrame> = Vec::with_capacity(n);
    for (f, &s) in frame_symbols.iter().enumerate() {
        let p = pattern(s, f, period, cfg.amplitude);
        for c in 0..3 {
            channels[c].push(p[c] + noise.sample(&mut rng));
        }
        let mut au = [0.0; AU_COUNT];
        for v in au.iter_mut() {
            *v = (0.3 + au_noise.sample(&mut rng)).max(0.0);
        }
        for a in active_aus(s) {
            au[a] = (2.0 + au_noise.sample(&mut rng)).max(0.0);
        }
        frames.push(au);
    }

    let video_id = format!("synth_{index:04}");
    let [pitch, yaw, roll] = channels;
    let pose = HeadPoseSeries::uniform(video_id.clone(), cfg.fps, pitch, yaw, roll)?;
    let aus = AUFrameTrack::uniform(video_id, cfg.fps, frames)?;
    let hits = frame_symbols.iter().filter(|s| cfg.score_symbols.contains(s)).count();
    let score = hits as f64 / n.max(1) as f64;
    let scores = cfg.traits.iter().map(|t| (t.clone(), score)).collect();
    Ok(SynthVideo { pose, aus, frame_symbols, scores, propensity })
}

/// Generates a corpus; identical configs give bit-identical corpora.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let window = cfg.window();
    let planted = (1..=cfg.k)
        .map(|j| {
            let mut t = AngleTrajectory { pitch: vec![], yaw: vec![], roll: vec![] };
            for f in 0..window.len_frames {
                let p = pattern(j, f, window.step_frames, cfg.amplitude);
                t.pitch.push(p[0]);
                t.yaw.push(p[1]);
                t.roll.push(p[2]);
            }
            t
        })
        .collect();
    let videos = (0..cfg.n_videos)
        .into_par_iter()
        .map(|i| generate_video(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthDataset { config: cfg.clone(), planted, videos })
}

/// Per-window planted symbol; `None` where a window straddles two blocks.
pub fn window_truth(frame_symbols: &[usize], window: WindowSpec) -> Vec<Option<usize>> {
    window
        .starts(frame_symbols.len())
        .map(|st| {
            let w = &frame_symbols[st..st + window.len_frames];
            w.iter().all(|&s| s == w[0]).then_some(w[0])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub k: usize,
    pub window: WindowSpec,
    pub videos: BTreeMap<String, Vec<Option<usize>>>,
}

impl SynthDataset {
    pub fn window(&self) -> WindowSpec {
        self.config.window()
    }

    pub fn truth(&self) -> PlantedTruth {
        PlantedTruth {
            k: self.config.k,
            window: self.window(),
            videos: self
                .videos
                .iter()
                .map(|v| (v.pose.video_id.clone(), window_truth(&v.frame_symbols, self.window())))
                .collect(),
        }
    }

    pub fn pose(&self) -> Vec<HeadPoseSeries> {
        self.videos.iter().map(|v| v.pose.clone()).collect()
    }

    /// A codebook whose kinemes are exactly the planted patterns.
    pub fn planted_codebook(&self) -> Result<Codebook> {
        let k = self.config.k;
        let headroom = 1.25 * self.config.amplitude + 6.0 * self.config.noise_sigma;
        let offsets = ChannelOffsets { pitch: headroom, yaw: headroom, roll: headroom };
        let ell = self.window().len_frames;
        let mut basis = DMatrix::zeros(3 * ell, k);
        for (j, t) in self.planted.iter().enumerate() {
            let mut col = t.to_column();
            offsets.shift_column(col.as_mut_slice())?;
            basis.set_column(j, &col);
        }
        let mixture = GaussianMixture {
            weights: vec![1.0 / k as f64; k],
            means: (0..k).map(|j| DVector::from_fn(k, |i, _| if i == j { 1.0 } else { 0.0 })).collect(),
            covariance: Covariance::Diagonal(vec![DVector::from_element(k, 0.01); k]),
            log_likelihood_trace: vec![],
        };
        Codebook::from_parts(basis, mixture, offsets, self.window(), self.config.fps)
    }

    /// Writes `features/<id>.csv`, `manifest.json` and `planted.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        let features = dir.join("features");
        std::fs::create_dir_all(&features)?;
        self.videos
            .par_iter()
            .map(|v| write_openface_csv(&features.join(format!("{}.csv", v.pose.video_id)), &v.pose, &v.aus))
            .collect::<Result<Vec<_>>>()?;
        let entries = self
            .videos
            .iter()
            .map(|v| VideoEntry {
                video_id: v.pose.video_id.clone(),
                features: Path::new("features").join(format!("{}.csv", v.pose.video_id)),
                scores: v.scores.clone(),
                split: None,
                fps: Some(self.config.fps),
            })
            .collect();
        let mut manifest = Manifest::new(self.config.traits.clone(), entries);
        manifest.base_dir = dir.to_path_buf();
        manifest.save(&dir.join("manifest.json"))?;
        std::fs::write(dir.join("planted.json"), serde_json::to_string_pretty(&self.truth())?)?;
        Ok(manifest)
    }
}
