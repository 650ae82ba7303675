//! End-to-end acceptance checks on synthetic data. Prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use std::collections::HashSet;
use std::time::Instant;

use kineme::action_units::dominant_au_sequence;
use kineme::analytics::explain::{percentile_explain, ExplainReport, ExplainVideo, TOP_AUS, TOP_KINEMES};
use kineme::analytics::matching::matched_accuracy;
use kineme::analytics::{eval_metrics, fuse_decisions, pcc, Label, Task};
use kineme::factorization::{kkt_violation, nmf_fit, nnls_project, NmfConfig};
use kineme::mixture::{gmm_fit, GmmConfig};
use kineme::pipeline::{build_items, run_crossval, synth_generate, window_truth, CrossvalConfig, FeatureConfig, Manifest, ModelKind, SynthConfig};
use kineme::predictors::seqnet::{DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use kineme::predictors::{
    hmm_fit, seqnet_train, DiscreteHmm, Example, HeadKind, HmmClassifier, HmmConfig, LossKind, SeqInput, SeqNet, SeqNetSpec, TrainConfig,
};
use kineme::{encode_many, learn_kinemes, KinemeConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn planted_recovery() -> Check {
    let start = Instant::now();
    let ds = synth_generate(&SynthConfig { k: 4, n_videos: 200, duration_s: 20.0, noise_sigma: 0.005, seed: 11, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let poses = ds.pose();
    let cb = learn_kinemes(&poses, &KinemeConfig { k: 4, seed: 3, ..Default::default() }).map_err(|e| e.to_string())?;
    let seqs = encode_many(&poses, &cb).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (seq, v) in seqs.iter().zip(&ds.videos) {
        pred.extend(&seq.symbols);
        truth.extend(window_truth(&v.frame_symbols, ds.window()));
    }
    let m = matched_accuracy(&pred, &truth, 4).map_err(|e| e.to_string())?;
    ensure(m.accuracy >= 0.90, format!("matched accuracy {:.4} < 0.90", m.accuracy))?;
    ensure(elapsed < 60.0, format!("took {elapsed:.1}s"))?;
    Ok(format!("matched accuracy {:.4} over {} windows, {elapsed:.1}s", m.accuracy, m.evaluated))
}

fn nmf_monotone() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let h = DMatrix::from_fn(180, 500, |_, _| rng.random::<f64>());
        let f = nmf_fit(&h, &NmfConfig { rank: 8, max_iters: 200, rel_tol: 0.0, seed: i }).map_err(|e| e.to_string())?;
        ensure(f.objective_trace.len() == 201, format!("matrix {i}: {} objective values", f.objective_trace.len()))?;
        for w in f.objective_trace.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    ensure(worst <= 1e-10, format!("objective rose by {worst:e}"))?;
    Ok(format!("20 × 200 iterations, largest single-step change {worst:.3e} (negative = always decreasing)"))
}

/// Exhaustive active-set search for tiny NNLS problems.
fn brute_force_nnls(h: &DVector<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let r = b.ncols();
    let mut best = (h.norm(), DVector::zeros(r));
    for mask in 1u32..(1 << r) {
        let cols: Vec<usize> = (0..r).filter(|j| mask >> j & 1 == 1).collect();
        let sub = DMatrix::from_fn(b.nrows(), cols.len(), |i, j| b[(i, cols[j])]);
        let Some(x) = (sub.tr_mul(&sub)).cholesky().map(|c| c.solve(&sub.tr_mul(h))) else { continue };
        if x.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut c = DVector::zeros(r);
        for (j, &col) in cols.iter().enumerate() {
            c[col] = x[j];
        }
        let res = (h - b * &c).norm();
        if res < best.0 {
            best = (res, c);
        }
    }
    best.1
}

fn nnls_correct() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_ratio: f64 = 0.0;
    let mut max_diff: f64 = 0.0;
    for i in 0..100 {
        let r = 1 + i % 6;
        let m = 30 + i % 20;
        let b = DMatrix::from_fn(m, r, |_, _| rng.random::<f64>() - 0.3);
        let h = DVector::from_fn(m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let c = nnls_project(&h, &b).map_err(|e| e.to_string())?.values;
        let (viol, tau) = kkt_violation(&h, &b, &c);
        ensure(viol <= tau, format!("instance {i}: KKT violation {viol:e} > {tau:e}"))?;
        max_ratio = max_ratio.max(viol / tau.max(f64::MIN_POSITIVE));
        if r <= 3 {
            let bf = brute_force_nnls(&h, &b);
            let d = (&c - &bf).amax();
            ensure(d <= 1e-8, format!("instance {i}: differs from brute force by {d:e}"))?;
            max_diff = max_diff.max(d);
        }
    }
    Ok(format!("100 instances, worst KKT violation {max_ratio:.2e}·τ, brute-force gap {max_diff:e}"))
}

fn gmm_em() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let normal = rand_distr::Normal::new(0.0, 0.1).unwrap();
    use rand_distr::Distribution;
    let mut fits = 0;
    for trial in 0..20 {
        let k = 2 + trial % 3;
        let n = 300;
        let pts = DMatrix::from_fn(3, n, |_, j| (j % k) as f64 + normal.sample(&mut rng) * (1.0 + trial as f64 * 0.1));
        let g = gmm_fit(&pts, &GmmConfig { seed: trial as u64, ..GmmConfig::new(k) }).map_err(|e| e.to_string())?;
        for w in g.log_likelihood_trace.windows(2) {
            ensure(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), format!("fit {trial}: log-likelihood fell {} -> {}", w[0], w[1]))?;
        }
        fits += 1;
    }
    let pts = DMatrix::from_fn(2, 400, |_, j| {
        let centre = if j < 200 { 0.0 } else { 5.0 };
        centre + normal.sample(&mut rng)
    });
    let g = gmm_fit(&pts, &GmmConfig { seed: 1, ..GmmConfig::new(2) }).map_err(|e| e.to_string())?;
    let mut means: Vec<f64> = g.means.iter().map(|m| m[0]).collect();
    means.sort_by(f64::total_cmp);
    let err = (means[0] - 0.0).abs().max((means[1] - 5.0).abs());
    let err2 = g.means.iter().map(|m| (m[1] - m[0]).abs()).fold(0.0, f64::max);
    let err = err.max(err2);
    ensure(err <= 0.05, format!("mean error {err:.4}"))?;
    Ok(format!("{fits} monotone fits, two-cluster mean error {err:.4}"))
}

fn random_hmm(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DiscreteHmm {
    let row = |rng: &mut ChaCha8Rng, len: usize| {
        let v: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    DiscreteHmm {
        initial: row(rng, n),
        transitions: (0..n).map(|_| row(rng, n)).collect(),
        emissions: (0..n).map(|_| row(rng, k)).collect(),
    }
}

fn enumerate_paths(m: &DiscreteHmm, seq: &[usize]) -> f64 {
    let n = m.n_states();
    let total = n.pow(seq.len() as u32);
    let mut sum = 0.0;
    for code in 0..total {
        let mut c = code;
        let path: Vec<usize> = (0..seq.len()).map(|_| { let s = c % n; c /= n; s }).collect();
        let mut p = m.initial[path[0]] * m.emissions[path[0]][seq[0] - 1];
        for t in 1..seq.len() {
            p *= m.transitions[path[t - 1]][path[t]] * m.emissions[path[t]][seq[t] - 1];
        }
        sum += p;
    }
    sum
}

fn sample_hmm(m: &DiscreteHmm, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let draw = |p: &[f64], rng: &mut ChaCha8Rng| {
        let mut u: f64 = rng.random();
        for (i, w) in p.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        p.len() - 1
    };
    let mut s = draw(&m.initial, rng);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(draw(&m.emissions[s], rng) + 1);
        s = draw(&m.transitions[s], rng);
    }
    out
}

fn hmm_checks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for len in 1..=6 {
            for _ in 0..5 {
                let m = random_hmm(&mut rng, n, 3);
                let seq: Vec<usize> = (0..len).map(|_| rng.random_range(1..=3)).collect();
                let exact = enumerate_paths(&m, &seq);
                let fwd = m.log_likelihood(&seq).map_err(|e| e.to_string())?.exp();
                worst = worst.max((exact - fwd).abs());
            }
        }
    }
    ensure(worst <= 1e-10, format!("forward differs from enumeration by {worst:e}"))?;

    for seed in 0..10 {
        let truth = random_hmm(&mut rng, 3, 5);
        let seqs: Vec<Vec<usize>> = (0..20).map(|_| sample_hmm(&truth, 30, &mut rng)).collect();
        let fit = hmm_fit(&seqs, 5, &HmmConfig { n_states: 3, seed, ..Default::default() }).map_err(|e| e.to_string())?;
        for w in fit.log_likelihood_trace.windows(2) {
            ensure(w[1] >= w[0] - 1e-9 * w[0].abs(), format!("Baum-Welch fell {} -> {}", w[0], w[1]))?;
        }
    }

    // low: lingers on symbols 1-2; high: cycles through 3-4
    let low = DiscreteHmm {
        initial: vec![0.5, 0.5],
        transitions: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        emissions: vec![vec![0.6, 0.2, 0.1, 0.1], vec![0.2, 0.6, 0.1, 0.1]],
    };
    let high = DiscreteHmm {
        initial: vec![0.5, 0.5],
        transitions: vec![vec![0.2, 0.8], vec![0.8, 0.2]],
        emissions: vec![vec![0.1, 0.2, 0.6, 0.1], vec![0.2, 0.1, 0.1, 0.6]],
    };
    let mut seqs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..100 {
        let (m, l) = if i % 2 == 0 { (&low, Label::Low) } else { (&high, Label::High) };
        seqs.push(sample_hmm(m, 20, &mut rng));
        labels.push(l);
    }
    let clf = HmmClassifier::fit(&seqs, &labels, 4, &HmmConfig { n_states: 2, seed: 9, ..Default::default() }).map_err(|e| e.to_string())?;
    let mut correct = 0;
    for i in 0..50 {
        let (m, l) = if i % 2 == 0 { (&low, Label::Low) } else { (&high, Label::High) };
        let s = sample_hmm(m, 20, &mut rng);
        correct += (clf.classify(&s).map_err(|e| e.to_string())? == l) as usize;
    }
    let acc = correct as f64 / 50.0;
    ensure(acc >= 0.90, format!("two-class accuracy {acc:.2}"))?;
    Ok(format!("forward gap {worst:e}, Baum-Welch monotone, two-class accuracy {acc:.2}"))
}

fn grad_check(spec: SeqNetSpec, loss: LossKind, ex: &Example, seed: u64) -> std::result::Result<f64, String> {
    let net = SeqNet::new(spec, seed).map_err(|e| e.to_string())?;
    let (_, grad) = net.loss_and_gradient(ex, loss, None).map_err(|e| e.to_string())?;
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (name, range) in net.layout().groups() {
        let mut num = Vec::with_capacity(range.len());
        for i in range.clone() {
            let mut p = net.params.clone();
            p[i] += eps;
            let up = SeqNet::from_params(spec, p.clone()).unwrap().loss(ex, loss).unwrap();
            p[i] -= 2.0 * eps;
            let down = SeqNet::from_params(spec, p).unwrap().loss(ex, loss).unwrap();
            num.push((up - down) / (2.0 * eps));
        }
        let ana = &grad[range];
        let diff: f64 = num.iter().zip(ana).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt() + ana.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = if scale > 1e-12 { diff / scale } else { diff };
        if rel > 1e-4 {
            return Err(format!("group {name}: relative error {rel:e}"));
        }
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn lstm_checks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let k = 5;
    let symbols: Vec<usize> = (0..7).map(|_| rng.random_range(1..=k)).collect();
    let au: Vec<[u8; 17]> = (0..7).map(|_| std::array::from_fn(|_| rng.random_range(0..2))).collect();
    let input = SeqInput { kineme: Some(SeqInput::one_hot(&symbols, k)), au: Some(SeqInput::au_rows(&au)) };
    let mut worst: f64 = 0.0;
    for (head, loss, target) in [
        (HeadKind::Classification, LossKind::BinaryCrossEntropy, 1.0),
        (HeadKind::Regression, LossKind::MeanAbsoluteError, 0.3),
    ] {
        let ex = Example { input: input.clone(), target };
        worst = worst.max(grad_check(SeqNetSpec::fusion(k, head), loss, &ex, 2)?);
    }

    // held-out detection of the motif 2,3,2
    let k = 4;
    let has_motif = |s: &[usize]| s.windows(3).any(|w| w == [2, 3, 2]);
    let make = |rng: &mut ChaCha8Rng, positive: bool| loop {
        let mut s: Vec<usize> = (0..12).map(|_| rng.random_range(1..=k)).collect();
        if positive {
            let at = rng.random_range(0..=9);
            s[at..at + 3].copy_from_slice(&[2, 3, 2]);
        }
        if has_motif(&s) == positive {
            return s;
        }
    };
    let data: Vec<Example> = (0..800)
        .map(|i| {
            let s = make(&mut rng, i % 2 == 1);
            Example { input: SeqInput { kineme: Some(SeqInput::one_hot(&s, k)), au: None }, target: (i % 2) as f64 }
        })
        .collect();
    let (train, rest) = data.split_at(500);
    let (val, test) = rest.split_at(100);
    let spec = SeqNetSpec::kineme(k, HeadKind::Classification);
    let out = seqnet_train(SeqNet::new(spec, 1).unwrap(), train, Some(val), &TrainConfig { epochs: 60, seed: 1, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let correct = test
        .iter()
        .filter(|e| Label::from_score(out.net.score(&e.input).unwrap()).as_f64() == e.target)
        .count();
    let acc = correct as f64 / test.len() as f64;
    ensure(acc >= 0.90, format!("motif accuracy {acc:.3}"))?;

    let fusion = SeqNetSpec::fusion(16, HeadKind::Classification);
    let d = TrainConfig::default();
    ensure(
        DEFAULT_HIDDEN == 32
            && fusion.kineme.unwrap().hidden == 32
            && fusion.au.unwrap().hidden == 32
            && fusion.merged_width() == 64
            && DEFAULT_DROPOUT == 0.2
            && fusion.dropout == 0.2
            && d.learning_rate == 0.01,
        "hyperparameters differ from hidden 32 / merge 64 / dropout 0.2 / lr 0.01",
    )?;
    Ok(format!("gradient relative error {worst:.1e}, motif accuracy {acc:.3} ({} epochs)", out.trace.len()))
}

fn fusion_checks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for run in 0..200 {
        let n = 20 + run % 30;
        let task = if run % 2 == 0 { Task::Regression } else { Task::Classification };
        let gt: Vec<f64> = (0..n)
            .map(|_| match task {
                Task::Regression => rng.random::<f64>(),
                Task::Classification => rng.random_range(0..2) as f64,
            })
            .collect();
        let noisy = |rng: &mut ChaCha8Rng, s: f64| gt.iter().map(|g| (g + s * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)).collect::<Vec<_>>();
        let kin = noisy(&mut rng, 1.2);
        let au = noisy(&mut rng, 1.2);
        let r = fuse_decisions(&kin, &au, &gt, &kin, &au, task).map_err(|e| e.to_string())?;
        let on_grid = (r.alpha * 100.0 - (r.alpha * 100.0).round()).abs() < 1e-9 && (0.0..=1.0).contains(&r.alpha);
        ensure(on_grid, format!("run {run}: α = {} off the grid", r.alpha))?;
        ensure(
            r.val_metric >= r.val_metric_kin.max(r.val_metric_au),
            format!("run {run}: fused {} below unimodal {} / {}", r.val_metric, r.val_metric_kin, r.val_metric_au),
        )?;
    }
    let gt: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
    let noise: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
    let r = fuse_decisions(&gt, &noise, &gt, &gt, &noise, Task::Regression).map_err(|e| e.to_string())?;
    ensure(r.alpha == 1.0, format!("exact kineme scores gave α = {}", r.alpha))?;
    Ok("200 runs on grid and dominating both modalities; exact kineme scores give α = 1.00".into())
}

fn metric_checks() -> Check {
    let cases: [(&[f64], &[f64], f64); 3] = [
        (&[0.2, 0.5, 0.9], &[0.1, 0.7, 0.9], 0.9),
        (&[0.0, 1.0], &[1.0, 0.0], 0.0),
        (&[0.25, 0.75, 0.5, 0.5], &[0.5, 0.5, 0.5, 0.0], 0.75),
    ];
    for (pred, gt, want) in cases {
        let got = eval_metrics(pred, gt, Task::Regression).map_err(|e| e.to_string())?.acc_reg.unwrap();
        ensure((got - want).abs() <= 1e-12, format!("acc_reg {got} != {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let mut a: f64 = rng.random_range(0.01..10.0);
        if rng.random::<bool>() {
            a = -a;
        }
        let b = rng.random_range(-5.0..5.0);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (r, degenerate) = pcc(&x, &y).map_err(|e| e.to_string())?;
        ensure(!degenerate, "unexpected zero variance")?;
        worst = worst.max((r - a.signum()).abs());
    }
    ensure(worst <= 1e-9, format!("affine PCC off by {worst:e}"))?;
    Ok(format!("hand cases exact to 1e-12, affine PCC within {worst:e} on 1000 vectors"))
}

fn crossval_protocol() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = synth_generate(&SynthConfig { n_videos: 30, duration_s: 15.0, seed: 21, ..Default::default() }).map_err(|e| e.to_string())?;
    ds.write(dir.path()).map_err(|e| e.to_string())?;
    let manifest = Manifest::load(&dir.path().join("manifest.json")).map_err(|e| e.to_string())?;
    let features = manifest.load_features(&Default::default()).map_err(|e| e.to_string())?;
    let poses: Vec<_> = features.iter().map(|f| f.pose.clone()).collect();
    let cb = learn_kinemes(&poses, &KinemeConfig { k: 4, seed: 1, ..Default::default() }).map_err(|e| e.to_string())?;
    let scores = manifest.scores("O").map_err(|e| e.to_string())?;
    let fc = FeatureConfig { chunk: Some(kineme::pipeline::ChunkSpec::seconds(5.0)), ..Default::default() };
    let items = build_items(&features, &scores, &cb, &fc).map_err(|e| e.to_string())?;
    let cfg = CrossvalConfig { model: ModelKind::Hmm, task: Task::Classification, seed: 5, ..Default::default() };
    let a = run_crossval(&items, 4, &cfg).map_err(|e| e.to_string())?;
    ensure(a.runs.len() == 50, format!("{} runs", a.runs.len()))?;
    for rep in 0..5 {
        let mut tested = Vec::new();
        for r in a.runs.iter().filter(|r| r.repeat == rep) {
            let test: HashSet<&String> = r.test_ids.iter().collect();
            ensure(r.train_ids.iter().chain(&r.val_ids).all(|v| !test.contains(v)), "video in both train and test")?;
            ensure(r.train_ids.len() + r.val_ids.len() + r.test_ids.len() == 30, "split does not cover the corpus")?;
            tested.extend(r.test_ids.iter().cloned());
        }
        tested.sort();
        let all: Vec<String> = {
            let mut v: Vec<String> = items.iter().map(|i| i.video_id.clone()).collect();
            v.sort();
            v
        };
        ensure(tested == all, format!("repeat {rep}: test folds do not partition the videos"))?;
    }
    let b = run_crossval(&items, 4, &cfg).map_err(|e| e.to_string())?;
    let ja = serde_json::to_string(&a).unwrap();
    let jb = serde_json::to_string(&b).unwrap();
    ensure(ja == jb, "reports differ under a fixed seed")?;
    let (acc, f1) = a.video.headline();
    Ok(format!("50 runs, folds partition every repeat, identical reruns; video Acc {} F1 {}", acc.unwrap(), f1.unwrap()))
}

fn explain_report() -> Check {
    let ds = synth_generate(&SynthConfig { k: 4, n_videos: 100, duration_s: 20.0, noise_sigma: 0.0, score_symbols: vec![1, 2], seed: 31, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let cb = ds.planted_codebook().map_err(|e| e.to_string())?;
    let seqs = encode_many(&ds.pose(), &cb).map_err(|e| e.to_string())?;
    let videos: Vec<ExplainVideo> = ds
        .videos
        .iter()
        .zip(seqs)
        .map(|(v, s)| ExplainVideo {
            video_id: s.video_id,
            score: v.scores["O"],
            kinemes: s.symbols,
            aus: dominant_au_sequence(&v.aus, 2.0, 1.0).unwrap().dominance,
        })
        .collect();
    let [high, low] = percentile_explain(&videos, "O", 10.0, 4).map_err(|e| e.to_string())?;
    let top2 = |r: &kineme::analytics::ExplainRow| {
        let mut t = r.top_kinemes()[..2].to_vec();
        t.sort();
        t
    };
    ensure(top2(&high) == [1, 2], format!("high set ranks {:?} first", high.top_kinemes()))?;
    ensure(top2(&low) == [3, 4], format!("low set ranks {:?} first", low.top_kinemes()))?;
    for r in [&high, &low] {
        ensure(r.top_kinemes().len() == TOP_KINEMES && r.top_aus().len() == TOP_AUS, "row is not 4 kinemes + 5 AUs")?;
    }
    let text = ExplainReport { percentile: 10.0, rows: vec![high.clone(), low.clone()] }.to_text();
    ensure(text.lines().count() == 3 && text.contains("O(H)") && text.contains("O(L)"), "text table layout")?;
    Ok(format!("O(H) kinemes {:?} AUs {:?}; O(L) kinemes {:?} AUs {:?}", high.top_kinemes(), high.top_aus(), low.top_kinemes(), low.top_aus()))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("planted codebook recovery", planted_recovery),
        ("NMF monotonicity", nmf_monotone),
        ("NNLS correctness", nnls_correct),
        ("GMM EM", gmm_em),
        ("HMM", hmm_checks),
        ("LSTM", lstm_checks),
        ("fusion", fusion_checks),
        ("metrics", metric_checks),
        ("cross-validation protocol", crossval_protocol),
        ("explain report", explain_report),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
