use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kineme::analytics::{
    aggregate_video, eval_metrics, fuse_decisions, metrics_table, percentile_explain, ExplainReport, ExplainVideo,
    MetricsReport, PcaLinReg, Task,
};
use kineme::pipeline::{
    fold_assignment, run_crossval, synth_generate, ChunkFeatures, ChunkSpec, CrossvalConfig, FeatureConfig, ModelKind,
    PipelineConfig, SynthConfig, VideoItem,
};
use kineme::predictors::{
    seqnet_train, Example, HeadKind, HmmClassifier, HmmConfig, LossKind, SeqInput, SeqNet, SeqNetCheckpoint,
    SeqNetSpec, TrainConfig,
};
use kineme::{dominant_au_sequence, encode_many, kineme_trajectories, learn_kinemes, Codebook};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Corpus, PredictionRow};
use crate::{plot, Cli, Command, InputsArg, ModelArg, TaskArg, TrainArgs, UsageError};

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let out = Out(cli.out_dir.clone());

    match cli.command {
        Command::Learn { manifest, k } => learn(&out, &cfg, &manifest, k),
        Command::Encode { manifest, codebook } => encode(&out, &cfg, &manifest, &codebook),
        Command::Aus { manifest } => aus(&out, &cfg, &manifest),
        Command::Explain { manifest, codebook, traits, percentile } => {
            explain(&out, &cfg, &manifest, &codebook, &traits, percentile.unwrap_or(cfg.explain.percentile))
        }
        Command::Train(args) => train(&out, &cfg, &args),
        Command::Fuse { kin, au, task } => fuse(&out, task_of(task, &cfg), &kin, &au),
        Command::Eval { model, manifest, codebook, predictions, task } => match (model, predictions) {
            (Some(model), None) => {
                // clap guarantees both are present alongside --model
                eval_model(&out, &cfg, &model, &manifest.unwrap(), &codebook.unwrap())
            }
            (None, Some(p)) => eval_predictions(&out, task_of(task, &cfg), &p),
            _ => Err(UsageError("eval needs either --model or --predictions".into()).into()),
        },
        Command::Crossval { manifest, codebook, traits, models, task, folds, repeats, chunk_s } => {
            let mut cv = CrossvalConfig { task: task_of(task, &cfg), ..cfg.crossval.clone() };
            cv.folds = folds.unwrap_or(cv.folds);
            cv.repeats = repeats.unwrap_or(cv.repeats);
            let features = features_with_chunk(&cfg.features, chunk_s);
            crossval(&out, &cfg, &cv, &features, &manifest, codebook.as_deref(), &traits, &models)
        }
        Command::Synth { videos, k, sigma, duration } => {
            let d = SynthConfig::default();
            let sc = SynthConfig {
                n_videos: videos.unwrap_or(d.n_videos),
                k: k.unwrap_or(d.k),
                noise_sigma: sigma.unwrap_or(d.noise_sigma),
                duration_s: duration.unwrap_or(d.duration_s),
                seed: cli.seed.unwrap_or(d.seed),
                ..d
            };
            synth(&out, &sc)
        }
        Command::Plot { codebook } => plot_codebook(&out, &codebook),
    }
}

struct Out(PathBuf);

impl Out {
    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        data::write_json(&p, value)?;
        Ok(p)
    }

    fn text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }
}

fn task_of(arg: Option<TaskArg>, cfg: &PipelineConfig) -> Task {
    arg.map_or(cfg.crossval.task, Task::from)
}

fn features_with_chunk(base: &FeatureConfig, chunk_s: Option<f64>) -> FeatureConfig {
    match chunk_s {
        Some(s) => FeatureConfig { chunk: Some(ChunkSpec::seconds(s)), ..base.clone() },
        None => base.clone(),
    }
}

fn learn(out: &Out, cfg: &PipelineConfig, manifest: &Path, k: Option<usize>) -> Result<()> {
    let corpus = data::load_corpus(manifest, cfg)?;
    let mut kc = cfg.kineme.clone();
    kc.k = k.unwrap_or(kc.k);
    let poses: Vec<_> = corpus.features.into_iter().map(|f| f.pose).collect();
    let cb = learn_kinemes(&poses, &kc)?;
    let path = out.text("codebook.json", &cb.to_json()?)?;
    println!("{} kinemes learned from {} videos -> {}", cb.k(), poses.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct EncodedRow<'a> {
    video_id: &'a str,
    window: usize,
    start_s: f64,
    kineme: usize,
}

fn encode(out: &Out, cfg: &PipelineConfig, manifest: &Path, codebook: &Path) -> Result<()> {
    let corpus = data::load_corpus(manifest, cfg)?;
    let cb = data::load_codebook(codebook)?;
    let poses: Vec<_> = corpus.features.into_iter().map(|f| f.pose).collect();
    let seqs = encode_many(&poses, &cb)?;
    out.json("kineme_sequences.json", &seqs)?;
    let csv_path = out.path("kineme_sequences.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for s in &seqs {
        for (i, (&sym, &t)) in s.symbols.iter().zip(&s.window_starts).enumerate() {
            w.serialize(EncodedRow { video_id: &s.video_id, window: i, start_s: t, kineme: sym })?;
        }
    }
    w.flush()?;
    let windows: usize = seqs.iter().map(|s| s.len()).sum();
    println!("{} videos, {windows} windows encoded -> {}", seqs.len(), csv_path.display());
    Ok(())
}

fn aus(out: &Out, cfg: &PipelineConfig, manifest: &Path) -> Result<()> {
    let corpus = data::load_corpus(manifest, cfg)?;
    let f = &cfg.features;
    let seqs = corpus
        .features
        .par_iter()
        .map(|v| dominant_au_sequence(&v.aus, f.au_window_s, f.au_step_s))
        .collect::<kineme::Result<Vec<_>>>()?;
    let path = out.json("au_sequences.json", &seqs)?;
    println!("{} AU sequences -> {}", seqs.len(), path.display());
    Ok(())
}

fn explain(
    out: &Out,
    cfg: &PipelineConfig,
    manifest: &Path,
    codebook: &Path,
    traits: &[String],
    percentile: f64,
) -> Result<()> {
    let corpus = data::load_corpus(manifest, cfg)?;
    let cb = data::load_codebook(codebook)?;
    let traits = if traits.is_empty() { corpus.manifest.traits.clone() } else { traits.to_vec() };
    // whole videos, whatever the configured thin-slice length
    let whole = FeatureConfig { chunk: None, ..cfg.features.clone() };
    let mut rows = Vec::new();
    for t in &traits {
        let videos: Vec<ExplainVideo> = data::items(&corpus, &cb, t, &whole)?
            .into_iter()
            .map(|v| {
                let c = v.chunks.into_iter().next().expect("whole-video items have one chunk");
                ExplainVideo { video_id: v.video_id, score: v.score, kinemes: c.kinemes, aus: c.aus }
            })
            .collect();
        rows.extend(percentile_explain(&videos, t, percentile, cb.k())?);
    }
    let report = ExplainReport { percentile, rows };
    out.text("explain.csv", &report.to_csv())?;
    out.text("explain.txt", &report.to_text())?;
    print!("{}", report.to_text());
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TrainedModel {
    Hmm { classifier: HmmClassifier },
    Lstm { checkpoint: SeqNetCheckpoint },
    Pca { model: PcaLinReg },
}

/// A trained predictor plus what is needed to rebuild its inputs and targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    trait_name: String,
    task: Task,
    /// Median of the training scores; splits High from Low.
    threshold: f64,
    chunk_s: Option<f64>,
    seed: u64,
    model: TrainedModel,
}

fn head_of(task: Task) -> HeadKind {
    match task {
        Task::Regression => HeadKind::Regression,
        Task::Classification => HeadKind::Classification,
    }
}

fn seq_input(spec: &SeqNetSpec, c: &ChunkFeatures, k: usize) -> SeqInput {
    SeqInput {
        kineme: spec.kineme.map(|_| SeqInput::one_hot(&c.kinemes, k)),
        au: spec.au.map(|_| SeqInput::au_rows(&c.aus)),
    }
}

fn lstm_examples(spec: &SeqNetSpec, items: &[VideoItem], ids: &[usize], targets: &[f64], k: usize) -> Vec<Example> {
    ids.iter()
        .flat_map(|&v| items[v].chunks.iter().map(move |c| (c, targets[v])))
        .map(|(c, target)| Example { input: seq_input(spec, c, k), target })
        .collect()
}

fn pose_rows(chunks: &[&ChunkFeatures]) -> Result<DMatrix<f64>> {
    let width = chunks.first().map_or(0, |c| c.pose.len());
    if let Some(bad) = chunks.iter().find(|c| c.pose.len() != width) {
        bail!(kineme::Error::WidthMismatch { expected: width, got: bad.pose.len() });
    }
    Ok(DMatrix::from_row_iterator(chunks.len(), width, chunks.iter().flat_map(|c| c.pose.iter().copied())))
}

fn train(out: &Out, cfg: &PipelineConfig, args: &TrainArgs) -> Result<()> {
    let task = task_of(args.task, cfg);
    if args.model == ModelArg::Hmm && task == Task::Regression {
        return Err(UsageError("the HMM predictor is a classifier; use --task classification".into()).into());
    }
    let corpus = data::load_corpus(&args.manifest, cfg)?;
    let cb = data::load_codebook(&args.codebook)?;
    let features = features_with_chunk(&cfg.features, args.chunk_s);
    let items = data::items(&corpus, &cb, &args.trait_name, &features)?;

    let split = |name: &str| -> Vec<usize> {
        (0..items.len()).filter(|&i| data::split_of(&corpus.manifest, i) == name).collect()
    };
    let mut train_ids: Vec<usize> = (0..items.len())
        .filter(|&i| matches!(data::split_of(&corpus.manifest, i), "" | "train"))
        .collect();
    let mut val_ids = split("val");
    let seed = cfg.crossval.seed;
    if args.model == ModelArg::Lstm && val_ids.is_empty() && cfg.crossval.val_fraction > 0.0 && train_ids.len() > 2 {
        // hold out roughly val_fraction of the training videos for early stopping
        let parts = ((1.0 / cfg.crossval.val_fraction).round() as usize).clamp(2, train_ids.len());
        let fold = fold_assignment(train_ids.len(), parts, seed, 0);
        val_ids = train_ids.iter().zip(&fold).filter(|(_, &f)| f == 0).map(|(&i, _)| i).collect();
        train_ids = train_ids.iter().zip(&fold).filter(|(_, &f)| f != 0).map(|(&i, _)| i).collect();
        log::info!("no val split in the manifest; holding out {} training videos", val_ids.len());
    }
    if train_ids.is_empty() {
        bail!(kineme::Error::EmptyInput);
    }
    let mut labelled: Vec<usize> = train_ids.iter().chain(&val_ids).copied().collect();
    labelled.sort_unstable();
    let threshold = data::median_of(&items, &labelled)?;
    let targets = data::targets(&items, task, threshold);
    let k = cb.k();

    let model = match args.model {
        ModelArg::Hmm => {
            let mut seqs = Vec::new();
            let mut labels = Vec::new();
            for &v in &train_ids {
                for c in &items[v].chunks {
                    seqs.push(c.kinemes.as_slice());
                    labels.push(kineme::analytics::Label::from_score(targets[v]));
                }
            }
            let classifier = HmmClassifier::fit(&seqs, &labels, k, &HmmConfig { seed, ..cfg.crossval.hmm })?;
            TrainedModel::Hmm { classifier }
        }
        ModelArg::Lstm => {
            let head = head_of(task);
            let spec = match args.inputs {
                InputsArg::Kin => SeqNetSpec::kineme(k, head),
                InputsArg::Au => SeqNetSpec::au(head),
                InputsArg::Ff => SeqNetSpec::fusion(k, head),
            };
            let train = lstm_examples(&spec, &items, &train_ids, &targets, k);
            let val = lstm_examples(&spec, &items, &val_ids, &targets, k);
            let tc = TrainConfig { loss: LossKind::for_head(head), seed, ..cfg.crossval.train };
            let outcome = seqnet_train(SeqNet::new(spec, seed)?, &train, (!val.is_empty()).then_some(&val[..]), &tc)?;
            log::info!("best epoch {} of {}", outcome.best_epoch, outcome.trace.len());
            TrainedModel::Lstm { checkpoint: outcome.net.to_checkpoint() }
        }
        ModelArg::Pca => {
            let chunks: Vec<&ChunkFeatures> = train_ids.iter().flat_map(|&v| &items[v].chunks).collect();
            let y: Vec<f64> =
                train_ids.iter().flat_map(|&v| std::iter::repeat_n(targets[v], items[v].chunks.len())).collect();
            let model = PcaLinReg::fit(&pose_rows(&chunks)?, &y, cfg.crossval.variance_kept)?;
            log::info!("{} principal components kept", model.n_components());
            TrainedModel::Pca { model }
        }
    };
    let file = ModelFile {
        trait_name: args.trait_name.clone(),
        task,
        threshold,
        chunk_s: args.chunk_s,
        seed,
        model,
    };
    let path = out.json(&args.output, &file)?;
    println!("trained on {} videos ({} validation) -> {}", train_ids.len(), val_ids.len(), path.display());
    Ok(())
}

fn predict(model: &TrainedModel, c: &ChunkFeatures, k: usize, net: Option<&SeqNet>) -> Result<f64> {
    Ok(match model {
        TrainedModel::Hmm { classifier } => classifier.score(&c.kinemes)?,
        TrainedModel::Lstm { .. } => {
            let net = net.expect("network is built for LSTM models");
            net.score(&seq_input(&net.spec, c, k))?
        }
        TrainedModel::Pca { model } => model.predict(&pose_rows(&[c])?)?[0].clamp(0.0, 1.0),
    })
}

fn eval_model(out: &Out, cfg: &PipelineConfig, model: &Path, manifest: &Path, codebook: &Path) -> Result<()> {
    let text = fs::read_to_string(model).with_context(|| format!("reading model {}", model.display()))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(kineme::Error::from)?;
    let corpus = data::load_corpus(manifest, cfg)?;
    let cb = data::load_codebook(codebook)?;
    let features = features_with_chunk(&cfg.features, file.chunk_s);
    let items = data::items(&corpus, &cb, &file.trait_name, &features)?;
    let targets = data::targets(&items, file.task, file.threshold);
    let net = match &file.model {
        TrainedModel::Lstm { checkpoint } => Some(SeqNet::from_checkpoint(checkpoint)?),
        _ => None,
    };

    let k = cb.k();
    let per_video = items
        .par_iter()
        .enumerate()
        .map(|(v, item)| {
            item.chunks
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    Ok(PredictionRow {
                        video_id: item.video_id.clone(),
                        chunk: i,
                        split: data::split_of(&corpus.manifest, v).to_string(),
                        score: predict(&file.model, c, k, net.as_ref())?,
                        target: targets[v],
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<PredictionRow> = per_video.into_iter().flatten().collect();
    data::write_predictions(&out.path("predictions.csv"), &rows)?;
    report_metrics(out, file.task, &rows)
}

fn eval_predictions(out: &Out, task: Task, path: &Path) -> Result<()> {
    report_metrics(out, task, &data::read_predictions(path)?)
}

/// Chunk- and video-level metrics over the test rows (every row when
/// nothing is tagged `test`).
fn report_metrics(out: &Out, task: Task, rows: &[PredictionRow]) -> Result<()> {
    let tagged: Vec<&PredictionRow> = rows.iter().filter(|r| r.split == "test").collect();
    let rows: Vec<&PredictionRow> = if tagged.is_empty() {
        log::warn!("no rows tagged test; scoring all {} rows", rows.len());
        rows.iter().collect()
    } else {
        tagged
    };
    let chunk = eval_metrics(
        &rows.iter().map(|r| r.score).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.target).collect::<Vec<_>>(),
        task,
    )?;

    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, (Vec<f64>, f64)> = HashMap::new();
    for r in &rows {
        let g = groups.entry(&r.video_id).or_insert_with(|| {
            order.push(&r.video_id);
            (Vec::new(), r.target)
        });
        g.0.push(r.score);
    }
    let mut vp = Vec::with_capacity(order.len());
    let mut vt = Vec::with_capacity(order.len());
    for id in &order {
        let (scores, target) = &groups[id];
        vp.push(aggregate_video(scores, task)?);
        vt.push(*target);
    }
    let video = eval_metrics(&vp, &vt, task)?;

    let chunk = MetricsReport::from_runs(task, &[chunk]);
    let video = MetricsReport::from_runs(task, &[video]);
    let csv = format!("{}\n{}\n{}\n", MetricsReport::CSV_HEADER, chunk.csv_row("chunk"), video.csv_row("video"));
    out.text("metrics.csv", &csv)?;
    print!("{}", metrics_table(&["chunk".into(), "video".into()], &[("eval".into(), vec![chunk, video])]));
    Ok(())
}

#[derive(Serialize)]
struct FusionSummary {
    alpha: f64,
    val_metric: f64,
    val_metric_kin: f64,
    val_metric_au: f64,
    val_rows: usize,
}

fn fuse(out: &Out, task: Task, kin: &Path, au: &Path) -> Result<()> {
    let kin = data::read_predictions(kin)?;
    let au = data::read_predictions(au)?;
    if kin.len() != au.len() {
        bail!(kineme::Error::LengthMismatch { left: kin.len(), right: au.len() });
    }
    if let Some((a, b)) = kin.iter().zip(&au).find(|(a, b)| (&a.video_id, a.chunk) != (&b.video_id, b.chunk)) {
        bail!("prediction files disagree: {}#{} vs {}#{}", a.video_id, a.chunk, b.video_id, b.chunk);
    }
    let val: Vec<usize> = (0..kin.len()).filter(|&i| kin[i].split == "val").collect();
    if val.is_empty() {
        bail!("no rows tagged val to choose the fusion weight on");
    }
    let pick = |rows: &[PredictionRow], f: fn(&PredictionRow) -> f64| val.iter().map(|&i| f(&rows[i])).collect::<Vec<_>>();
    let all = |rows: &[PredictionRow]| rows.iter().map(|r| r.score).collect::<Vec<_>>();
    let fused = fuse_decisions(
        &pick(&kin, |r| r.score),
        &pick(&au, |r| r.score),
        &pick(&kin, |r| r.target),
        &all(&kin),
        &all(&au),
        task,
    )?;
    let rows: Vec<PredictionRow> =
        kin.iter().zip(&fused.test_scores).map(|(r, &s)| PredictionRow { score: s, ..r.clone() }).collect();
    data::write_predictions(&out.path("fused_predictions.csv"), &rows)?;
    out.json(
        "fusion.json",
        &FusionSummary {
            alpha: fused.alpha,
            val_metric: fused.val_metric,
            val_metric_kin: fused.val_metric_kin,
            val_metric_au: fused.val_metric_au,
            val_rows: val.len(),
        },
    )?;
    println!(
        "alpha {:.2}: validation {:.4} (kineme {:.4}, AU {:.4})",
        fused.alpha, fused.val_metric, fused.val_metric_kin, fused.val_metric_au
    );
    report_metrics(out, task, &rows)
}

#[allow(clippy::too_many_arguments)]
fn crossval(
    out: &Out,
    cfg: &PipelineConfig,
    cv: &CrossvalConfig,
    features: &FeatureConfig,
    manifest: &Path,
    codebook: Option<&Path>,
    traits: &[String],
    models: &[ModelKind],
) -> Result<()> {
    let corpus = data::load_corpus(manifest, cfg)?;
    let cb = match codebook {
        Some(p) => data::load_codebook(p)?,
        None => learn_for(&corpus, cfg)?,
    };
    let traits = if traits.is_empty() { corpus.manifest.traits.clone() } else { traits.to_vec() };
    let models = if models.is_empty() { vec![cv.model] } else { models.to_vec() };

    let mut csv = format!("{}\n", MetricsReport::CSV_HEADER);
    let mut chunk_rows = Vec::new();
    let mut video_rows = Vec::new();
    for t in &traits {
        let items = data::items(&corpus, &cb, t, features)?;
        let mut chunk_reports = Vec::new();
        let mut video_reports = Vec::new();
        for &m in &models {
            let report = run_crossval(&items, cb.k(), &CrossvalConfig { model: m, ..cv.clone() })
                .with_context(|| format!("cross-validating {m} on trait {t}"))?;
            out.json(&format!("crossval_{t}_{m}.json"), &report)?;
            csv.push_str(&report.chunk.csv_row(&format!("{t}/{m}/chunk")));
            csv.push('\n');
            csv.push_str(&report.video.csv_row(&format!("{t}/{m}/video")));
            csv.push('\n');
            chunk_reports.push(report.chunk);
            video_reports.push(report.video);
        }
        chunk_rows.push((t.clone(), chunk_reports));
        video_rows.push((t.clone(), video_reports));
    }
    let names: Vec<String> = models.iter().map(|m| m.to_string()).collect();
    let runs = cv.folds * cv.repeats;
    let table = format!(
        "chunk level, {runs} runs\n{}\nvideo level, {runs} runs\n{}",
        metrics_table(&names, &chunk_rows),
        metrics_table(&names, &video_rows)
    );
    out.text("crossval_metrics.csv", &csv)?;
    out.text("crossval.txt", &table)?;
    print!("{table}");
    Ok(())
}

fn learn_for(corpus: &Corpus, cfg: &PipelineConfig) -> Result<Codebook> {
    log::info!("no codebook given; learning {} kinemes from the whole manifest", cfg.kineme.k);
    let poses: Vec<_> = corpus.features.iter().map(|f| f.pose.clone()).collect();
    Ok(learn_kinemes(&poses, &cfg.kineme)?)
}

fn synth(out: &Out, sc: &SynthConfig) -> Result<()> {
    let ds = synth_generate(sc)?;
    let manifest = ds.write(&out.0)?;
    println!(
        "{} synthetic videos ({} planted kinemes, sigma {}) -> {}",
        manifest.entries.len(),
        sc.k,
        sc.noise_sigma,
        out.path("manifest.json").display()
    );
    Ok(())
}

fn plot_codebook(out: &Out, codebook: &Path) -> Result<()> {
    let cb = data::load_codebook(codebook)?;
    let (trajectories, rows) = kineme_trajectories(&cb);
    out.text("kinemes.csv", &plot::trajectory_csv(&rows))?;
    let svg = out.text("kinemes.svg", &plot::trajectory_svg(trajectories, cb.fps))?;
    println!("{} kineme trajectories -> {}", trajectories.len(), svg.display());
    Ok(())
}
