//! Non-negative matrix factorization and non-negative least-squares projection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop once `(prev − cur)/prev` falls below this. `0.0` runs every iteration.
    pub rel_tol: f64,
    pub seed: u64,
}

impl NmfConfig {
    pub fn new(rank: usize) -> Self {
        NmfConfig { rank, max_iters: 500, rel_tol: 1e-6, seed: 0 }
    }
}

/// `H ≈ B·C` with both factors entrywise non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub basis: DMatrix<f64>,
    pub coefficients: DMatrix<f64>,
    pub rank: usize,
    /// Frobenius norm `‖H − BC‖_F` after the last iteration.
    pub final_objective: f64,
    /// Objective after each iteration; entry 0 is the initial guess.
    pub objective_trace: Vec<f64>,
}

/// Frobenius reconstruction error, accumulated column by column.
pub fn reconstruction_error(h: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let bc = b * c;
    let mut total = 0.0;
    for (hc, rc) in h.column_iter().zip(bc.column_iter()) {
        let col: f64 = hc.iter().zip(rc.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        total += col;
    }
    total.sqrt()
}

/// Fits `H ≈ BC` by Lee–Seung multiplicative updates for the Frobenius objective.
pub fn nmf_fit(h: &DMatrix<f64>, cfg: &NmfConfig) -> Result<FactorPair> {
    let (m, n) = h.shape();
    if let Some((idx, _)) = h.iter().enumerate().find(|(_, v)| **v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeInput { row: idx % m, col: idx / m });
    }
    let max_rank = m.min(n);
    if cfg.rank == 0 || cfg.rank > max_rank {
        return Err(Error::RankTooLarge { rank: cfg.rank, max: max_rank });
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("nmf max_iters must be at least 1".into()));
    }
    let r = cfg.rank;
    let mean = h.mean();
    let scale = if mean > 0.0 { (mean / r as f64).sqrt() } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // uniform on (0, 1]
    let mut draw = || (1.0 - rng.random::<f64>()) * scale;
    let mut b = DMatrix::from_fn(m, r, |_, _| draw());
    let mut c = DMatrix::from_fn(r, n, |_, _| draw());

    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let mut prev = reconstruction_error(h, &b, &c);
    trace.push(prev);
    for _ in 0..cfg.max_iters {
        let num_c = b.tr_mul(h);
        let den_c = b.tr_mul(&b) * &c;
        c.zip_zip_apply(&num_c, &den_c, |x, num, den| *x *= num / den.max(DENOM_FLOOR));

        let num_b = h * c.transpose();
        let den_b = &b * (&c * c.transpose());
        b.zip_zip_apply(&num_b, &den_b, |x, num, den| *x *= num / den.max(DENOM_FLOOR));

        let cur = reconstruction_error(h, &b, &c);
        trace.push(cur);
        let converged = prev > 0.0 && (prev - cur) / prev < cfg.rel_tol;
        prev = cur;
        if converged || cur == 0.0 {
            break;
        }
    }

    Ok(FactorPair { basis: b, coefficients: c, rank: r, final_objective: prev, objective_trace: trace })
}

/// Non-negative coefficients of one segment in the learned basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    pub values: DVector<f64>,
    /// `‖h − B·ĉ‖₂`
    pub residual: f64,
}

/// Reusable NNLS solver for a fixed basis; caches the Gram matrix `BᵀB`.
#[derive(Debug, Clone)]
pub struct NnlsProjector {
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl NnlsProjector {
    pub fn new(basis: &DMatrix<f64>) -> Self {
        NnlsProjector { gram: basis.tr_mul(basis), basis: basis.clone() }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Lawson–Hanson active-set solve of `min_{c ≥ 0} ‖h − Bc‖²`.
    pub fn project(&self, h: &DVector<f64>) -> Result<CoeffVector> {
        let (m, r) = self.basis.shape();
        if h.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: h.len() });
        }
        let bth = self.basis.tr_mul(h);
        let scale = bth.amax().max(f64::MIN_POSITIVE);
        let tol = 1e-13 * scale;

        let mut x = DVector::<f64>::zeros(r);
        let mut passive = vec![false; r];
        let max_outer = 3 * r + 10;
        for _ in 0..max_outer {
            let w = &bth - &self.gram * &x;
            let candidate = (0..r)
                .filter(|&j| !passive[j])
                .max_by(|&a, &b| w[a].total_cmp(&w[b]));
            match candidate {
                Some(j) if w[j] > tol => passive[j] = true,
                _ => break,
            }
            for _ in 0..(3 * r + 10) {
                let s = self.solve_passive(&bth, &passive)?;
                if (0..r).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                    x = s;
                    break;
                }
                let mut alpha = f64::INFINITY;
                for i in (0..r).filter(|&i| passive[i] && s[i] <= 0.0) {
                    let a = x[i] / (x[i] - s[i]);
                    if a < alpha {
                        alpha = a;
                    }
                }
                x += (s - &x) * alpha;
                for i in 0..r {
                    if passive[i] && x[i] <= 1e-15 * scale.max(1.0) {
                        passive[i] = false;
                        x[i] = 0.0;
                    }
                }
            }
        }
        let residual = (h - &self.basis * &x).norm();
        Ok(CoeffVector { values: x, residual })
    }

    fn solve_passive(&self, bth: &DVector<f64>, passive: &[bool]) -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |a, b| self.gram[(idx[a], idx[b])]);
        let rhs = DVector::from_fn(k, |a, _| bth[idx[a]]);
        let sol = match sub.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => sub
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .map_err(|e| Error::Numerical(format!("nnls subproblem: {e}")))?,
        };
        let mut full = DVector::zeros(passive.len());
        for (a, &i) in idx.iter().enumerate() {
            full[i] = sol[a];
        }
        Ok(full)
    }
}

/// One-shot convenience wrapper around [`NnlsProjector`].
pub fn nnls_project(h: &DVector<f64>, basis: &DMatrix<f64>) -> Result<CoeffVector> {
    NnlsProjector::new(basis).project(h)
}

/// Largest violation of the NNLS optimality conditions at `c`, and the
/// tolerance `1e-6·‖Bᵀh‖_∞` it is judged against.
pub fn kkt_violation(h: &DVector<f64>, basis: &DMatrix<f64>, c: &DVector<f64>) -> (f64, f64) {
    let g = basis.tr_mul(&(basis * c - h));
    let tau = 1e-6 * basis.tr_mul(h).amax();
    let mut worst: f64 = 0.0;
    for i in 0..c.len() {
        if c[i] < 0.0 {
            worst = worst.max(-c[i]);
        }
        if c[i] > 0.0 {
            worst = worst.max(g[i].abs());
        } else {
            worst = worst.max(-g[i]);
        }
    }
    (worst, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_nonneg(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
    }

    #[test]
    fn recovers_planted_rank_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b0 = random_nonneg(30, 2, &mut rng);
        let c0 = random_nonneg(2, 40, &mut rng);
        let h = &b0 * &c0;
        let fit = nmf_fit(&h, &NmfConfig { rank: 2, max_iters: 20_000, rel_tol: 0.0, seed: 3 }).unwrap();
        let rel = fit.final_objective / h.norm();
        assert!(rel <= 1e-3, "relative error {rel}");
    }

    #[test]
    fn recovers_rank_one_outer_product() {
        let u = DVector::from_vec((1..=12).map(|i| i as f64 * 0.1).collect());
        let v = DVector::from_vec((1..=9).map(|i| 1.0 / i as f64).collect());
        let h = &u * v.transpose();
        let fit = nmf_fit(&h, &NmfConfig { rank: 1, max_iters: 5000, rel_tol: 0.0, seed: 1 }).unwrap();
        let rel = fit.final_objective / h.norm();
        assert!(rel <= 1e-6, "relative error {rel}");
    }

    #[test]
    fn zero_column_gets_zero_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut h = random_nonneg(10, 8, &mut rng);
        h.column_mut(3).fill(0.0);
        let fit = nmf_fit(&h, &NmfConfig { rank: 3, max_iters: 200, rel_tol: 0.0, seed: 0 }).unwrap();
        assert!(fit.coefficients.column(3).amax() < 1e-12);
    }

    #[test]
    fn nmf_rejects_bad_input() {
        let mut h = DMatrix::from_element(4, 4, 1.0);
        assert!(matches!(
            nmf_fit(&h, &NmfConfig::new(5)),
            Err(Error::RankTooLarge { rank: 5, max: 4 })
        ));
        h[(2, 1)] = -0.5;
        assert!(matches!(
            nmf_fit(&h, &NmfConfig::new(2)),
            Err(Error::NegativeInput { row: 2, col: 1 })
        ));
    }

    #[test]
    fn nmf_is_monotone_and_non_negative() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let h = random_nonneg(24, 30, &mut rng);
            let fit = nmf_fit(&h, &NmfConfig { rank: 4, max_iters: 200, rel_tol: 0.0, seed }).unwrap();
            assert_eq!(fit.objective_trace.len(), 201);
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "seed {seed}: {} -> {}", w[0], w[1]);
            }
            assert!(fit.basis.min() >= 0.0 && fit.coefficients.min() >= 0.0);
        }
    }

    #[test]
    fn nmf_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_nonneg(10, 10, &mut rng);
        let cfg = NmfConfig { rank: 3, max_iters: 50, rel_tol: 0.0, seed: 42 };
        assert_eq!(nmf_fit(&h, &cfg).unwrap(), nmf_fit(&h, &cfg).unwrap());
    }

    #[test]
    fn nnls_identity_basis() {
        let b = DMatrix::identity(2, 2);
        let c = nnls_project(&DVector::from_vec(vec![3.0, 4.0]), &b).unwrap();
        assert!((c.values[0] - 3.0).abs() < 1e-12 && (c.values[1] - 4.0).abs() < 1e-12);
        assert!(c.residual < 1e-12);
    }

    #[test]
    fn nnls_one_dimensional_closed_form() {
        let b = DMatrix::from_vec(2, 1, vec![1.0, 1.0]);
        let c = nnls_project(&DVector::from_vec(vec![1.0, 2.0]), &b).unwrap();
        assert!((c.values[0] - 1.5).abs() < 1e-12);
        let c = nnls_project(&DVector::from_vec(vec![-1.0, -2.0]), &b).unwrap();
        assert_eq!(c.values[0], 0.0);
    }

    #[test]
    fn nnls_dimension_mismatch() {
        let b = DMatrix::identity(3, 2);
        assert!(matches!(
            nnls_project(&DVector::zeros(2), &b),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn nnls_recovers_feasible_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let b = random_nonneg(20, 5, &mut rng);
            let c0 = DVector::from_fn(5, |i, _| if i % 2 == 0 { rng.random::<f64>() } else { 0.0 });
            let c = nnls_project(&(&b * &c0), &b).unwrap();
            assert!((c.values - c0).norm() <= 1e-6);
        }
    }
}
