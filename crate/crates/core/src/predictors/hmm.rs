//! Discrete-emission HMM over kineme symbols, trained by scaled Baum–Welch.
//!
//! Symbols are 1-based (`1..=K`) at the API boundary, 0-based inside.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteHmm {
    pub initial: Vec<f64>,
    /// Row-stochastic, n × n.
    pub transitions: Vec<Vec<f64>>,
    /// Row-stochastic, n × K.
    pub emissions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmmConfig {
    pub n_states: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Emission smoothing mass applied by [`HmmClassifier::fit`].
    pub smoothing: f64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig { n_states: 4, max_iters: 200, rel_tol: 1e-6, seed: 0, smoothing: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmFit {
    pub model: DiscreteHmm,
    /// Corpus log-likelihood before each re-estimation, plus the final value.
    pub log_likelihood_trace: Vec<f64>,
}

impl DiscreteHmm {
    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.emissions.first().map_or(0, Vec::len)
    }

    fn check_symbols(&self, seq: &[usize]) -> Result<()> {
        let k = self.n_symbols();
        match seq.iter().find(|&&s| s == 0 || s > k) {
            Some(&symbol) => Err(Error::SymbolOutOfRange { symbol, k }),
            None => Ok(()),
        }
    }

    /// Mixes every emission row with the uniform distribution:
    /// `(1 − λ)·e + λ/K`.
    pub fn smoothed(&self, lambda: f64) -> DiscreteHmm {
        let k = self.n_symbols() as f64;
        let mut out = self.clone();
        for row in &mut out.emissions {
            for e in row.iter_mut() {
                *e = (1.0 - lambda) * *e + lambda / k;
            }
        }
        out
    }

    /// Scaled forward pass. Returns `-∞` for impossible sequences.
    pub fn log_likelihood(&self, seq: &[usize]) -> Result<f64> {
        self.check_symbols(seq)?;
        Ok(self.forward(seq).1)
    }

    /// Scaled forward variables and the log-likelihood.
    fn forward(&self, seq: &[usize]) -> (Vec<Vec<f64>>, f64) {
        let n = self.n_states();
        let mut alphas = Vec::with_capacity(seq.len());
        let mut ll = 0.0;
        let mut prev: Vec<f64> = Vec::new();
        for (t, &sym) in seq.iter().enumerate() {
            let o = sym - 1;
            let mut a: Vec<f64> = (0..n)
                .map(|j| {
                    let into = if t == 0 {
                        self.initial[j]
                    } else {
                        (0..n).map(|i| prev[i] * self.transitions[i][j]).sum()
                    };
                    into * self.emissions[j][o]
                })
                .collect();
            let c: f64 = a.iter().sum();
            if c <= 0.0 {
                return (alphas, f64::NEG_INFINITY);
            }
            a.iter_mut().for_each(|v| *v /= c);
            ll += c.ln();
            alphas.push(a.clone());
            prev = a;
        }
        (alphas, ll)
    }

    fn is_stochastic(&self) -> bool {
        let ok = |row: &[f64]| row.iter().all(|v| *v >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        ok(&self.initial) && self.transitions.iter().all(|r| ok(r)) && self.emissions.iter().all(|r| ok(r))
    }
}

fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Baum–Welch over a corpus of 1-based symbol sequences with alphabet size `k`.
pub fn hmm_fit<S: AsRef<[usize]>>(sequences: &[S], k: usize, cfg: &HmmConfig) -> Result<HmmFit> {
    if sequences.iter().all(|s| s.as_ref().is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    if cfg.n_states == 0 || k == 0 {
        return Err(Error::InvalidConfig("HMM needs at least one state and one symbol".into()));
    }
    for s in sequences {
        if let Some(&symbol) = s.as_ref().iter().find(|&&x| x == 0 || x > k) {
            return Err(Error::SymbolOutOfRange { symbol, k });
        }
    }
    let n = cfg.n_states;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = DiscreteHmm {
        initial: random_simplex(n, &mut rng),
        transitions: (0..n).map(|_| random_simplex(n, &mut rng)).collect(),
        emissions: (0..n).map(|_| random_simplex(k, &mut rng)).collect(),
    };

    let mut trace = Vec::new();
    let mut iter = 0;
    loop {
        let mut pi_acc = vec![0.0; n];
        let mut trans_num = vec![vec![0.0; n]; n];
        let mut trans_den = vec![0.0; n];
        let mut emit_num = vec![vec![0.0; k]; n];
        let mut emit_den = vec![0.0; n];
        let mut n_seqs = 0.0;
        let mut total_ll = 0.0;

        for seq in sequences.iter().map(AsRef::as_ref).filter(|s| !s.is_empty()) {
            let (alphas, ll) = model.forward(seq);
            if !ll.is_finite() {
                return Err(Error::Numerical("training sequence has zero likelihood".into()));
            }
            total_ll += ll;
            n_seqs += 1.0;
            let t_len = seq.len();
            // scaled backward pass; scale factors recomputed from the alphas
            let mut betas = vec![vec![1.0; n]; t_len];
            for t in (0..t_len - 1).rev() {
                let o = seq[t + 1] - 1;
                let mut b: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|j| model.transitions[i][j] * model.emissions[j][o] * betas[t + 1][j]).sum())
                    .collect();
                let c: f64 = b.iter().sum();
                b.iter_mut().for_each(|v| *v /= c);
                betas[t] = b;
            }
            for t in 0..t_len {
                let mut gamma: Vec<f64> = (0..n).map(|i| alphas[t][i] * betas[t][i]).collect();
                let g: f64 = gamma.iter().sum();
                gamma.iter_mut().for_each(|v| *v /= g);
                if t == 0 {
                    for i in 0..n {
                        pi_acc[i] += gamma[i];
                    }
                }
                for i in 0..n {
                    emit_num[i][seq[t] - 1] += gamma[i];
                    emit_den[i] += gamma[i];
                }
                if t + 1 < t_len {
                    let o = seq[t + 1] - 1;
                    let mut xi = vec![vec![0.0; n]; n];
                    let mut z = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let v = alphas[t][i] * model.transitions[i][j] * model.emissions[j][o] * betas[t + 1][j];
                            xi[i][j] = v;
                            z += v;
                        }
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let v = xi[i][j] / z;
                            trans_num[i][j] += v;
                            trans_den[i] += v;
                        }
                    }
                }
            }
        }

        let prev = trace.last().copied();
        trace.push(total_ll);
        if let Some(p) = prev {
            let p: f64 = p;
            if ((total_ll - p) / p.abs().max(1e-300)).abs() < cfg.rel_tol {
                break;
            }
        }
        if iter >= cfg.max_iters {
            break;
        }
        iter += 1;

        model.initial = pi_acc.iter().map(|v| v / n_seqs).collect();
        for i in 0..n {
            if trans_den[i] > 0.0 {
                model.transitions[i] = trans_num[i].iter().map(|v| v / trans_den[i]).collect();
            }
            if emit_den[i] > 0.0 {
                model.emissions[i] = emit_num[i].iter().map(|v| v / emit_den[i]).collect();
            }
        }
        renormalize(&mut model);
    }
    debug_assert!(model.is_stochastic());
    Ok(HmmFit { model, log_likelihood_trace: trace })
}

fn renormalize(model: &mut DiscreteHmm) {
    let norm = |row: &mut Vec<f64>| {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    };
    norm(&mut model.initial);
    model.transitions.iter_mut().for_each(norm);
    model.emissions.iter_mut().for_each(norm);
}

/// Per-class generative HMMs; predicts the class whose model scores higher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmClassifier {
    pub low: DiscreteHmm,
    pub high: DiscreteHmm,
}

impl HmmClassifier {
    /// Fits one model per class and applies emission smoothing.
    pub fn fit<S: AsRef<[usize]>>(sequences: &[S], labels: &[Label], k: usize, cfg: &HmmConfig) -> Result<Self> {
        if sequences.len() != labels.len() {
            return Err(Error::LengthMismatch { left: sequences.len(), right: labels.len() });
        }
        let pick = |want: Label| -> Vec<&[usize]> {
            sequences
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == want)
                .map(|(s, _)| s.as_ref())
                .collect()
        };
        let low = hmm_fit(&pick(Label::Low), k, cfg)?.model.smoothed(cfg.smoothing);
        let high_cfg = HmmConfig { seed: cfg.seed.wrapping_add(1), ..*cfg };
        let high = hmm_fit(&pick(Label::High), k, &high_cfg)?.model.smoothed(cfg.smoothing);
        Ok(HmmClassifier { low, high })
    }

    pub fn classify(&self, seq: &[usize]) -> Result<Label> {
        hmm_classify(&self.low, &self.high, seq)
    }

    /// Probability-like score for `High`: logistic of the per-symbol
    /// log-likelihood ratio.
    pub fn score(&self, seq: &[usize]) -> Result<f64> {
        let lh = self.high.log_likelihood(seq)?;
        let ll = self.low.log_likelihood(seq)?;
        let d = match (lh.is_finite(), ll.is_finite()) {
            (true, true) => (lh - ll) / seq.len().max(1) as f64,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => 0.0,
        };
        Ok(1.0 / (1.0 + (-d).exp()))
    }
}

/// Label of the higher-likelihood model; ties go to `Low`.
pub fn hmm_classify(low: &DiscreteHmm, high: &DiscreteHmm, seq: &[usize]) -> Result<Label> {
    if low.n_symbols() != high.n_symbols() {
        return Err(Error::DimensionMismatch { expected: low.n_symbols(), got: high.n_symbols() });
    }
    let ll = low.log_likelihood(seq)?;
    let lh = high.log_likelihood(seq)?;
    Ok(if lh > ll { Label::High } else { Label::Low })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> DiscreteHmm {
        DiscreteHmm {
            initial: vec![0.6, 0.4],
            transitions: vec![vec![0.7, 0.3], vec![0.2, 0.8]],
            emissions: vec![vec![0.5, 0.4, 0.1], vec![0.1, 0.2, 0.7]],
        }
    }

    #[test]
    fn deterministic_model_scores_zero() {
        let m = DiscreteHmm {
            initial: vec![1.0, 0.0],
            transitions: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            emissions: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert_eq!(m.log_likelihood(&[1, 2, 1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn length_two_matches_path_sum() {
        let m = two_state();
        let seq = [3, 1];
        let mut p = 0.0;
        for s0 in 0..2 {
            for s1 in 0..2 {
                p += m.initial[s0] * m.emissions[s0][2] * m.transitions[s0][s1] * m.emissions[s1][0];
            }
        }
        assert!((m.log_likelihood(&seq).unwrap() - p.ln()).abs() < 1e-12);
    }

    #[test]
    fn impossible_symbol_is_negative_infinity() {
        let mut m = two_state();
        for row in &mut m.emissions {
            row[1] = 0.0;
        }
        assert_eq!(m.log_likelihood(&[1, 2]).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(m.log_likelihood(&[4]), Err(Error::SymbolOutOfRange { symbol: 4, k: 3 })));
        assert!(matches!(m.log_likelihood(&[0]), Err(Error::SymbolOutOfRange { .. })));
    }

    #[test]
    fn single_state_emission_is_empirical_frequency() {
        let corpus = vec![vec![1, 2, 2, 3], vec![3, 3, 1], vec![2]];
        let fit = hmm_fit(&corpus, 4, &HmmConfig { n_states: 1, ..Default::default() }).unwrap();
        let expected = [2.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 0.0];
        for (e, x) in fit.model.emissions[0].iter().zip(expected) {
            assert!((e - x).abs() < 1e-9);
        }
    }

    #[test]
    fn repeated_symbol_concentrates_emission() {
        let corpus = vec![vec![5; 30]; 4];
        let fit = hmm_fit(&corpus, 16, &HmmConfig::default()).unwrap();
        for row in &fit.model.emissions {
            assert!(row[4] >= 0.999, "{row:?}");
        }
        // smoothing as mixing keeps the mode above 0.999 with λ = 1e-3
        let sm = fit.model.smoothed(1e-3);
        for row in &sm.emissions {
            assert!(row[4] >= 0.999);
            assert!(row.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn empty_corpus_and_bad_symbols() {
        let empty: Vec<Vec<usize>> = vec![];
        assert!(matches!(hmm_fit(&empty, 3, &HmmConfig::default()), Err(Error::EmptyCorpus)));
        assert!(matches!(
            hmm_fit(&[vec![1, 9]], 3, &HmmConfig::default()),
            Err(Error::SymbolOutOfRange { symbol: 9, k: 3 })
        ));
    }

    #[test]
    fn identical_models_tie_to_low() {
        let m = two_state();
        assert_eq!(hmm_classify(&m, &m, &[1, 2, 3]).unwrap(), Label::Low);
    }

    #[test]
    fn disjoint_single_state_models_classify_by_membership() {
        let low = DiscreteHmm {
            initial: vec![1.0],
            transitions: vec![vec![1.0]],
            emissions: vec![vec![0.5, 0.5, 0.0, 0.0]],
        };
        let high = DiscreteHmm {
            initial: vec![1.0],
            transitions: vec![vec![1.0]],
            emissions: vec![vec![0.0, 0.0, 0.5, 0.5]],
        };
        assert_eq!(hmm_classify(&low, &high, &[1, 2, 1]).unwrap(), Label::Low);
        assert_eq!(hmm_classify(&low, &high, &[3, 4, 4]).unwrap(), Label::High);
    }

    #[test]
    fn baum_welch_is_monotone_and_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let corpus: Vec<Vec<usize>> =
            (0..10).map(|_| (0..25).map(|_| rng.random_range(1..=5)).collect()).collect();
        let fit = hmm_fit(&corpus, 5, &HmmConfig { n_states: 3, rel_tol: 0.0, max_iters: 60, ..Default::default() })
            .unwrap();
        for w in fit.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        assert!(fit.model.is_stochastic());
    }
}
