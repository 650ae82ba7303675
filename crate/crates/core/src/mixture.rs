//! Gaussian mixture over NMF coefficient vectors, fitted by EM.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Below this responsibility mass a component counts as collapsed.
const COLLAPSE_MASS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceType {
    #[default]
    Diagonal,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub k: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub covariance: CovarianceType,
    /// Independent k-means++ starts; the fit with the highest final
    /// log-likelihood wins.
    pub restarts: usize,
}

impl GmmConfig {
    pub fn new(k: usize) -> Self {
        GmmConfig { k, max_iters: 300, rel_tol: 1e-8, seed: 0, covariance: CovarianceType::Diagonal, restarts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// Per-component variance vectors.
    Diagonal(Vec<DVector<f64>>),
    /// Per-component covariance matrices (floor added on the diagonal).
    Full(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariance: Covariance,
    /// Total log-likelihood per EM iteration. Restarts after a component re-seed.
    pub log_likelihood_trace: Vec<f64>,
}

impl GaussianMixture {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    /// Diagonal of each component covariance.
    pub fn variances(&self) -> Vec<DVector<f64>> {
        match &self.covariance {
            Covariance::Diagonal(v) => v.clone(),
            Covariance::Full(m) => m.iter().map(|c| c.diagonal()).collect(),
        }
    }

    fn densities(&self) -> Result<ComponentDensities> {
        ComponentDensities::new(self)
    }

    /// `log(w_j) + log N(x | μ_j, Σ_j)` for each component.
    pub fn log_joint(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let dens = self.densities()?;
        Ok((0..self.k()).map(|j| self.weights[j].ln() + dens.log_pdf(j, x, &self.means[j])).collect())
    }

    /// Responsibilities `P(j | x)`, computed in log space.
    pub fn posterior(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        let lj = self.log_joint(x)?;
        Ok(normalize_log(&lj))
    }

    /// Most probable component; ties go to the lowest index.
    pub fn map_component(&self, x: &DVector<f64>) -> Result<usize> {
        let lj = self.log_joint(x)?;
        Ok(argmax_first(&lj))
    }

    /// Reorders components by `order` (new position i takes old component `order[i]`).
    pub fn permuted(&self, order: &[usize]) -> GaussianMixture {
        let covariance = match &self.covariance {
            Covariance::Diagonal(v) => Covariance::Diagonal(order.iter().map(|&i| v[i].clone()).collect()),
            Covariance::Full(m) => Covariance::Full(order.iter().map(|&i| m[i].clone()).collect()),
        };
        GaussianMixture {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            means: order.iter().map(|&i| self.means[i].clone()).collect(),
            covariance,
            log_likelihood_trace: self.log_likelihood_trace.clone(),
        }
    }
}

/// Precomputed per-component terms (Cholesky factors for full covariance).
struct ComponentDensities {
    terms: Vec<DensityTerm>,
}

enum DensityTerm {
    Diag { inv_var: DVector<f64>, log_norm: f64 },
    Full { chol: nalgebra::Cholesky<f64, nalgebra::Dyn>, log_norm: f64 },
}

impl ComponentDensities {
    fn new(model: &GaussianMixture) -> Result<Self> {
        let d = model.dim() as f64;
        let terms = match &model.covariance {
            Covariance::Diagonal(vars) => vars
                .iter()
                .map(|v| DensityTerm::Diag {
                    inv_var: v.map(|x| 1.0 / x),
                    log_norm: -0.5 * (d * (2.0 * PI).ln() + v.iter().map(|x| x.ln()).sum::<f64>()),
                })
                .collect(),
            Covariance::Full(covs) => covs
                .iter()
                .map(|c| {
                    let chol = c
                        .clone()
                        .cholesky()
                        .ok_or_else(|| Error::Numerical("covariance not positive definite".into()))?;
                    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
                    Ok(DensityTerm::Full { chol, log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det) })
                })
                .collect::<Result<_>>()?,
        };
        Ok(ComponentDensities { terms })
    }

    fn log_pdf(&self, j: usize, x: &DVector<f64>, mean: &DVector<f64>) -> f64 {
        match &self.terms[j] {
            DensityTerm::Diag { inv_var, log_norm } => {
                let q: f64 = x.iter().zip(mean.iter()).zip(inv_var.iter()).map(|((a, m), iv)| (a - m) * (a - m) * iv).sum();
                log_norm - 0.5 * q
            }
            DensityTerm::Full { chol, log_norm } => {
                let diff = x - mean;
                let z = chol.l_dirty().solve_lower_triangular(&diff).unwrap_or(diff);
                log_norm - 0.5 * z.norm_squared()
            }
        }
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn normalize_log(v: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(v);
    if lse == f64::NEG_INFINITY {
        return vec![1.0 / v.len() as f64; v.len()];
    }
    let mut p: Vec<f64> = v.iter().map(|x| (x - lse).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Fits a `k`-component mixture to the columns of `points` (dim × n),
/// starting from k-means++ seeds.
pub fn gmm_fit(points: &DMatrix<f64>, cfg: &GmmConfig) -> Result<GaussianMixture> {
    check_points(points, cfg.k)?;
    let fits: Vec<Result<GaussianMixture>> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let means = kmeans_pp(points, cfg.k, &mut rng);
            fit_from(points, means, cfg)
        })
        .collect();
    let mut best: Option<(f64, GaussianMixture)> = None;
    let mut first_err = None;
    for fit in fits {
        match fit {
            Ok(g) => {
                let ll = g.log_likelihood_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
                if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                    best = Some((ll, g));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some((_, g)), _) => Ok(g),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one restart runs"),
    }
}

/// EM from caller-supplied initial means.
pub fn gmm_fit_from(points: &DMatrix<f64>, init_means: Vec<DVector<f64>>, cfg: &GmmConfig) -> Result<GaussianMixture> {
    check_points(points, cfg.k)?;
    if init_means.len() != cfg.k {
        return Err(Error::LengthMismatch { left: init_means.len(), right: cfg.k });
    }
    if let Some(m) = init_means.iter().find(|m| m.len() != points.nrows()) {
        return Err(Error::DimensionMismatch { expected: points.nrows(), got: m.len() });
    }
    fit_from(points, init_means, cfg)
}

fn check_points(points: &DMatrix<f64>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("mixture needs at least one component".into()));
    }
    if points.ncols() < k || points.nrows() == 0 {
        return Err(Error::TooFewPoints { points: points.ncols(), k });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite mixture input".into()));
    }
    Ok(())
}

fn kmeans_pp(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = points.ncols();
    let mut means = Vec::with_capacity(k);
    means.push(points.column(rng.random_range(0..n)).into_owned());
    let mut d2: Vec<f64> = points.column_iter().map(|c| (c - &means[0]).norm_squared()).collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let m = points.column(idx).into_owned();
        for (i, c) in points.column_iter().enumerate() {
            d2[i] = d2[i].min((c - &m).norm_squared());
        }
        means.push(m);
    }
    means
}

fn global_variance(points: &DMatrix<f64>) -> DVector<f64> {
    let n = points.ncols() as f64;
    let mean = points.column_mean();
    DVector::from_fn(points.nrows(), |d, _| {
        let v = points.row(d).iter().map(|x| (x - mean[d]).powi(2)).sum::<f64>() / n;
        v.max(VARIANCE_FLOOR)
    })
}

fn fit_from(
    points: &DMatrix<f64>,
    means: Vec<DVector<f64>>,
    cfg: &GmmConfig,
) -> Result<GaussianMixture> {
    let k = cfg.k;
    let dim = points.nrows();
    let n = points.ncols();
    let gvar = global_variance(points);
    let covariance = match cfg.covariance {
        CovarianceType::Diagonal => Covariance::Diagonal(vec![gvar.clone(); k]),
        CovarianceType::Full => Covariance::Full(vec![DMatrix::from_diagonal(&gvar); k]),
    };
    let mut model = GaussianMixture {
        weights: vec![1.0 / k as f64; k],
        means,
        covariance,
        log_likelihood_trace: Vec::new(),
    };
    let mut reseeded = vec![false; k];
    let mut resp = DMatrix::<f64>::zeros(k, n);
    let mut point_ll = vec![0.0; n];

    let mut iter = 0;
    loop {
        // E-step
        let dens = model.densities()?;
        let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
        let mut ll = 0.0;
        let mut lj = vec![0.0; k];
        for (i, x) in points.column_iter().enumerate() {
            let x = x.into_owned();
            for j in 0..k {
                lj[j] = log_w[j] + dens.log_pdf(j, &x, &model.means[j]);
            }
            let lse = log_sum_exp(&lj);
            point_ll[i] = lse;
            ll += lse;
            for j in 0..k {
                resp[(j, i)] = (lj[j] - lse).exp();
            }
        }
        if !ll.is_finite() {
            return Err(Error::Numerical("mixture log-likelihood is not finite".into()));
        }
        let prev = model.log_likelihood_trace.last().copied();
        model.log_likelihood_trace.push(ll);
        if let Some(p) = prev {
            if ((ll - p) / p.abs().max(1e-300)).abs() < cfg.rel_tol {
                break;
            }
        }
        if iter >= cfg.max_iters {
            break;
        }
        iter += 1;

        // M-step
        let mass: Vec<f64> = (0..k).map(|j| resp.row(j).sum()).collect();
        let collapsed = mass.iter().position(|&m| m < COLLAPSE_MASS);
        if let Some(j) = collapsed {
            if reseeded[j] {
                return Err(Error::DegenerateComponent(j));
            }
            reseeded[j] = true;
            // restart from the worst-explained point
            let far = argmax_first(&point_ll.iter().map(|v| -v).collect::<Vec<_>>());
            model.means[j] = points.column(far).into_owned();
            match &mut model.covariance {
                Covariance::Diagonal(v) => v[j] = gvar.clone(),
                Covariance::Full(m) => m[j] = DMatrix::from_diagonal(&gvar),
            }
            model.weights[j] = 1.0 / k as f64;
            let s: f64 = model.weights.iter().sum();
            model.weights.iter_mut().for_each(|w| *w /= s);
            log::debug!("mixture component {j} collapsed; re-seeded from point {far}");
            model.log_likelihood_trace.clear();
            continue;
        }
        for j in 0..k {
            model.weights[j] = mass[j] / n as f64;
            let mut mean = DVector::zeros(dim);
            for (i, x) in points.column_iter().enumerate() {
                mean.axpy(resp[(j, i)], &x, 1.0);
            }
            mean /= mass[j];
            match &mut model.covariance {
                Covariance::Diagonal(vars) => {
                    let mut var = DVector::zeros(dim);
                    for (i, x) in points.column_iter().enumerate() {
                        let r = resp[(j, i)];
                        for d in 0..dim {
                            var[d] += r * (x[d] - mean[d]).powi(2);
                        }
                    }
                    vars[j] = var.map(|v: f64| (v / mass[j]).max(VARIANCE_FLOOR));
                }
                Covariance::Full(covs) => {
                    let mut cov = DMatrix::zeros(dim, dim);
                    for (i, x) in points.column_iter().enumerate() {
                        let diff = x - &mean;
                        cov.ger(resp[(j, i)], &diff, &diff, 1.0);
                    }
                    cov /= mass[j];
                    for d in 0..dim {
                        cov[(d, d)] += VARIANCE_FLOOR;
                    }
                    covs[j] = cov;
                }
            }
            model.means[j] = mean;
        }
        let s: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= s);
    }
    Ok(model)
}

/// Centroid matrix `C*` (dim × k): column j is the mean of component j.
pub fn cluster_centroids(model: &GaussianMixture) -> DMatrix<f64> {
    DMatrix::from_columns(&model.means)
}
