//! Kineme learning and encoding.
//!
//! Learning runs segment → stack/shift → NMF → GMM over the coefficient
//! columns → centroids `C*` → `H* = B·C*` → unshift. Components are sorted
//! by descending mixture weight, so kineme 1 is the most frequent cluster.
//! Encoding shifts each window by the training offsets, projects it onto
//! `B` with NNLS and takes the MAP component.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{nmf_fit, NmfConfig, NnlsProjector};
use crate::mixture::{cluster_centroids, gmm_fit, Covariance, CovarianceType, GaussianMixture, GmmConfig};
use crate::pose::{
    segment_frames, stack_and_shift, unshift_column, AngleTrajectory, ChannelOffsets, HeadPoseSeries,
    WindowSpec,
};

pub const CODEBOOK_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinemeConfig {
    /// Number of kinemes.
    pub k: usize,
    /// NMF rank; `None` means `k`.
    pub rank: Option<usize>,
    pub segment_len_s: f64,
    pub overlap: f64,
    pub canonical_fps: f64,
    pub nmf_max_iters: usize,
    pub nmf_rel_tol: f64,
    pub gmm_max_iters: usize,
    pub gmm_rel_tol: f64,
    pub gmm_restarts: usize,
    pub covariance: CovarianceType,
    pub seed: u64,
}

impl Default for KinemeConfig {
    fn default() -> Self {
        KinemeConfig {
            k: 16,
            rank: None,
            segment_len_s: 2.0,
            overlap: 0.5,
            canonical_fps: 30.0,
            nmf_max_iters: 500,
            nmf_rel_tol: 1e-6,
            gmm_max_iters: 300,
            gmm_rel_tol: 1e-8,
            gmm_restarts: 10,
            covariance: CovarianceType::Diagonal,
            seed: 0,
        }
    }
}

impl KinemeConfig {
    pub fn rank(&self) -> usize {
        self.rank.unwrap_or(self.k)
    }
}

/// A learned kineme vocabulary plus everything needed to encode new series.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// `B`, shape 3ℓ × r.
    pub basis: DMatrix<f64>,
    pub mixture: GaussianMixture,
    /// `C*`, shape r × K.
    pub centroids: DMatrix<f64>,
    pub offsets: ChannelOffsets,
    pub window: WindowSpec,
    pub fps: f64,
    /// `H*` columns in angle space, kineme order.
    pub trajectories: Vec<AngleTrajectory>,
}

/// Kineme symbols (1-based) for consecutive windows of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinemeSequence {
    pub video_id: String,
    pub window_starts: Vec<f64>,
    pub symbols: Vec<usize>,
}

impl KinemeSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.mixture.k()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Assembles a codebook and derives `C*` and `H*` from the mixture and basis.
    pub fn from_parts(
        basis: DMatrix<f64>,
        mixture: GaussianMixture,
        offsets: ChannelOffsets,
        window: WindowSpec,
        fps: f64,
    ) -> Result<Codebook> {
        if basis.nrows() != 3 * window.len_frames {
            return Err(Error::DimensionMismatch { expected: 3 * window.len_frames, got: basis.nrows() });
        }
        if mixture.dim() != basis.ncols() {
            return Err(Error::DimensionMismatch { expected: basis.ncols(), got: mixture.dim() });
        }
        let centroids = cluster_centroids(&mixture);
        let h_star = &basis * &centroids;
        let trajectories = h_star
            .column_iter()
            .map(|c| unshift_column(c.as_slice(), &offsets))
            .collect::<Result<Vec<_>>>()?;
        Ok(Codebook { basis, mixture, centroids, offsets, window, fps, trajectories })
    }

    /// Symbol (1-based) for one raw, unshifted window column.
    pub fn classify_window(&self, projector: &NnlsProjector, raw: &[f64]) -> Result<(usize, usize)> {
        let mut col = raw.to_vec();
        let clamped = self.offsets.shift_column(&mut col)?;
        let coeffs = projector.project(&DVector::from_vec(col))?;
        Ok((self.mixture.map_component(&coeffs.values)? + 1, clamped))
    }

    pub fn to_document(&self) -> CodebookDocument {
        let (rows, cols) = self.basis.shape();
        let mut b = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                b.push(self.basis[(i, j)]);
            }
        }
        let (covariance, variances) = match &self.mixture.covariance {
            Covariance::Diagonal(v) => {
                (CovarianceType::Diagonal, v.iter().map(|x| x.iter().copied().collect()).collect())
            }
            Covariance::Full(m) => (
                CovarianceType::Full,
                m.iter().map(|c| c.transpose().iter().copied().collect()).collect(),
            ),
        };
        CodebookDocument {
            version: CODEBOOK_VERSION,
            k: self.k(),
            r: self.rank(),
            ell: self.window.len_frames,
            step: self.window.step_frames,
            fps: self.fps,
            offsets: self.offsets,
            basis: b,
            weights: self.mixture.weights.clone(),
            means: self.mixture.means.iter().map(|m| m.iter().copied().collect()).collect(),
            variances,
            covariance,
            centroids: self.centroids.column_iter().map(|c| c.iter().copied().collect()).collect(),
        }
    }

    pub fn from_document(doc: &CodebookDocument) -> Result<Codebook> {
        if doc.version != CODEBOOK_VERSION {
            return Err(Error::UnsupportedVersion(doc.version));
        }
        let rows = 3 * doc.ell;
        if doc.basis.len() != rows * doc.r {
            return Err(Error::DimensionMismatch { expected: rows * doc.r, got: doc.basis.len() });
        }
        for v in [doc.weights.len(), doc.means.len(), doc.variances.len()] {
            if v != doc.k {
                return Err(Error::LengthMismatch { left: v, right: doc.k });
            }
        }
        let basis = DMatrix::from_row_slice(rows, doc.r, &doc.basis);
        let means: Vec<DVector<f64>> = doc.means.iter().map(|m| DVector::from_vec(m.clone())).collect();
        let covariance = match doc.covariance {
            CovarianceType::Diagonal => {
                Covariance::Diagonal(doc.variances.iter().map(|v| DVector::from_vec(v.clone())).collect())
            }
            CovarianceType::Full => Covariance::Full(
                doc.variances
                    .iter()
                    .map(|v| {
                        if v.len() != doc.r * doc.r {
                            return Err(Error::DimensionMismatch { expected: doc.r * doc.r, got: v.len() });
                        }
                        Ok(DMatrix::from_row_slice(doc.r, doc.r, v))
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        let mixture = GaussianMixture { weights: doc.weights.clone(), means, covariance, log_likelihood_trace: vec![] };
        Codebook::from_parts(
            basis,
            mixture,
            doc.offsets,
            WindowSpec { len_frames: doc.ell, step_frames: doc.step },
            doc.fps,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Codebook> {
        let doc: CodebookDocument = serde_json::from_str(s)?;
        Codebook::from_document(&doc)
    }
}

/// Versioned on-disk form of a [`Codebook`]. `B` is stored row-major;
/// `centroids` lists the columns of `C*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookDocument {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub r: usize,
    pub ell: usize,
    pub step: usize,
    pub fps: f64,
    pub offsets: ChannelOffsets,
    #[serde(rename = "B")]
    pub basis: Vec<f64>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Diagonal variances, or row-major r×r matrices for full covariance.
    pub variances: Vec<Vec<f64>>,
    #[serde(default)]
    pub covariance: CovarianceType,
    pub centroids: Vec<Vec<f64>>,
}

/// Learns a K-kineme codebook from training series.
pub fn learn_kinemes(training: &[HeadPoseSeries], cfg: &KinemeConfig) -> Result<Codebook> {
    if training.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("kineme count must be positive".into()));
    }
    let window = WindowSpec::from_overlap(cfg.segment_len_s, cfg.overlap, cfg.canonical_fps)?;
    let per_video = training
        .par_iter()
        .map(|s| segment_frames(&s.resample(cfg.canonical_fps)?, window))
        .collect::<Result<Vec<_>>>()?;
    let (stacked, offsets) = stack_and_shift(&per_video)?;

    let rank = cfg.rank();
    let needed = (10 * cfg.k).max(rank + 1);
    if stacked.ncols() < needed {
        return Err(Error::InsufficientData { segments: stacked.ncols(), needed });
    }

    let factors = nmf_fit(
        &stacked.data,
        &NmfConfig { rank, max_iters: cfg.nmf_max_iters, rel_tol: cfg.nmf_rel_tol, seed: cfg.seed },
    )?;
    log::info!(
        "nmf: rank {rank}, {} iterations, objective {:.6}",
        factors.objective_trace.len() - 1,
        factors.final_objective
    );
    // Cluster the exact NNLS codes that encoding will produce, not the
    // partially converged multiplicative-update coefficients.
    let projector = NnlsProjector::new(&factors.basis);
    let codes = (0..stacked.ncols())
        .into_par_iter()
        .map(|j| projector.project(&stacked.data.column(j).into_owned()).map(|c| c.values))
        .collect::<Result<Vec<_>>>()?;
    let codes = DMatrix::from_columns(&codes);
    let gmm = gmm_fit(
        &codes,
        &GmmConfig {
            k: cfg.k,
            max_iters: cfg.gmm_max_iters,
            rel_tol: cfg.gmm_rel_tol,
            seed: cfg.seed.wrapping_add(1),
            covariance: cfg.covariance,
            restarts: cfg.gmm_restarts,
        },
    )?;

    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by(|&a, &b| gmm.weights[b].total_cmp(&gmm.weights[a]));
    let gmm = gmm.permuted(&order);

    Codebook::from_parts(factors.basis, gmm, offsets, window, cfg.canonical_fps)
}

/// Maps every window of `series` to its kineme.
pub fn encode_series(series: &HeadPoseSeries, codebook: &Codebook) -> Result<KinemeSequence> {
    let projector = NnlsProjector::new(&codebook.basis);
    encode_with(series, codebook, &projector)
}

fn encode_with(series: &HeadPoseSeries, codebook: &Codebook, projector: &NnlsProjector) -> Result<KinemeSequence> {
    let series = series.resample(codebook.fps)?;
    let segments = segment_frames(&series, codebook.window)?;
    let mut symbols = Vec::with_capacity(segments.ncols());
    let mut clamped = 0;
    for col in segments.data.column_iter() {
        let (sym, c) = codebook.classify_window(projector, col.as_slice())?;
        clamped += c;
        symbols.push(sym);
    }
    if clamped > 0 {
        log::warn!(
            "{}: {clamped} pose values fell below the training minimum and were clamped",
            series.video_id
        );
    }
    let window_starts = codebook
        .window
        .starts(series.len())
        .map(|st| series.timestamps[st])
        .collect();
    Ok(KinemeSequence { video_id: series.video_id.clone(), window_starts, symbols })
}

/// Encodes many series in parallel; output order follows input order.
pub fn encode_many(series: &[HeadPoseSeries], codebook: &Codebook) -> Result<Vec<KinemeSequence>> {
    let projector = NnlsProjector::new(&codebook.basis);
    series.par_iter().map(|s| encode_with(s, codebook, &projector)).collect()
}

/// One plot-ready sample of a kineme trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub kineme: usize,
    pub time_s: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

/// The K angle-space kineme curves, in kineme order, plus a flat table.
pub fn kineme_trajectories(codebook: &Codebook) -> (&[AngleTrajectory], Vec<TrajectoryRow>) {
    let mut rows = Vec::new();
    for (j, t) in codebook.trajectories.iter().enumerate() {
        for f in 0..t.len() {
            rows.push(TrajectoryRow {
                kineme: j + 1,
                time_s: f as f64 / codebook.fps,
                pitch: t.pitch[f],
                yaw: t.yaw[f],
                roll: t.roll[f],
            });
        }
    }
    (&codebook.trajectories, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Covariance;

    /// Two-kineme codebook with orthogonal basis columns (ℓ = 4).
    fn toy_codebook(k: usize) -> Codebook {
        let ell = 4;
        let basis = DMatrix::from_fn(3 * ell, k, |i, j| if i % k == j { 1.0 } else { 0.0 });
        let means = (0..k).map(|j| DVector::from_fn(k, |i, _| if i == j { 2.0 } else { 0.0 })).collect();
        let mixture = GaussianMixture {
            weights: vec![1.0 / k as f64; k],
            means,
            covariance: Covariance::Diagonal(vec![DVector::from_element(k, 0.01); k]),
            log_likelihood_trace: vec![],
        };
        Codebook::from_parts(
            basis,
            mixture,
            ChannelOffsets { pitch: 1.0, yaw: 1.0, roll: 1.0 },
            WindowSpec { len_frames: ell, step_frames: 2 },
            30.0,
        )
        .unwrap()
    }

    #[test]
    fn identity_centroids_give_unshifted_basis_columns() {
        let k = 3;
        let ell = 4;
        let basis = DMatrix::from_fn(3 * ell, k, |i, j| (i * 7 + j * 3) as f64 * 0.01);
        let mixture = GaussianMixture {
            weights: vec![1.0 / k as f64; k],
            means: (0..k).map(|j| DVector::from_fn(k, |i, _| (i == j) as u8 as f64)).collect(),
            covariance: Covariance::Diagonal(vec![DVector::from_element(k, 1.0); k]),
            log_likelihood_trace: vec![],
        };
        let offs = ChannelOffsets { pitch: 0.1, yaw: 0.2, roll: 0.3 };
        let cb = Codebook::from_parts(basis.clone(), mixture, offs, WindowSpec { len_frames: ell, step_frames: 2 }, 30.0)
            .unwrap();
        assert_eq!(cb.centroids, DMatrix::identity(k, k));
        for j in 0..k {
            let expected = unshift_column(basis.column(j).as_slice(), &offs).unwrap();
            assert_eq!(cb.trajectories[j], expected);
        }
        let (curves, rows) = kineme_trajectories(&cb);
        assert_eq!(curves.len(), k);
        assert_eq!(rows.len(), k * ell);
        assert_eq!(rows[ell].kineme, 2);
    }

    #[test]
    fn window_at_component_mean_maps_to_that_kineme() {
        let cb = toy_codebook(2);
        let projector = NnlsProjector::new(&cb.basis);
        for j in 0..2 {
            let shifted = &cb.basis * &cb.mixture.means[j];
            let raw = unshift_column(shifted.as_slice(), &cb.offsets).unwrap().to_column();
            let (sym, clamped) = cb.classify_window(&projector, raw.as_slice()).unwrap();
            assert_eq!(sym, j + 1);
            assert_eq!(clamped, 0);
        }
    }

    #[test]
    fn encoding_length_and_determinism() {
        let cb = toy_codebook(2);
        let n = 20;
        let s = HeadPoseSeries::uniform(
            "v",
            30.0,
            (0..n).map(|i| (i as f64 * 0.3).sin()).collect(),
            vec![0.0; n],
            vec![0.5; n],
        )
        .unwrap();
        let a = encode_series(&s, &cb).unwrap();
        assert_eq!(a.len(), cb.window.count(n));
        assert_eq!(a, encode_series(&s, &cb).unwrap());
        assert!(a.symbols.iter().all(|&x| (1..=2).contains(&x)));

        let short = s.slice(0, 3);
        assert!(matches!(encode_series(&short, &cb), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let cb = toy_codebook(3);
        let json = cb.to_json().unwrap();
        let back = Codebook::from_json(&json).unwrap();
        assert_eq!(back, cb);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn rejects_unknown_version() {
        let mut doc = toy_codebook(2).to_document();
        doc.version = 9;
        assert!(matches!(Codebook::from_document(&doc), Err(Error::UnsupportedVersion(9))));
    }
}
