use kineme::analytics::Task;
use kineme::pipeline::{
    build_items, run_crossval, synth_generate, ChunkSpec, CrossvalConfig, FeatureConfig, ModelKind, SynthConfig,
    VideoItem,
};
use kineme::predictors::TrainConfig;
use kineme::{learn_kinemes, Error, KinemeConfig};

fn corpus() -> (Vec<VideoItem>, usize) {
    let ds = synth_generate(&SynthConfig { n_videos: 24, duration_s: 12.0, seed: 6, ..Default::default() }).unwrap();
    let cb = learn_kinemes(&ds.pose(), &KinemeConfig { k: 4, seed: 2, ..Default::default() }).unwrap();
    let features: Vec<_> = ds
        .videos
        .iter()
        .map(|v| kineme::pipeline::FrameFeatures { pose: v.pose.clone(), aus: v.aus.clone(), report: Default::default() })
        .collect();
    let scores: Vec<f64> = ds.videos.iter().map(|v| v.scores["O"]).collect();
    let cfg = FeatureConfig { chunk: Some(ChunkSpec::seconds(4.0)), ..Default::default() };
    (build_items(&features, &scores, &cb, &cfg).unwrap(), cb.k())
}

fn config(model: ModelKind, task: Task) -> CrossvalConfig {
    CrossvalConfig {
        folds: 3,
        repeats: 2,
        seed: 4,
        task,
        model,
        train: TrainConfig { epochs: 4, batch_size: 16, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn every_model_runs_the_full_protocol() {
    let (items, k) = corpus();
    assert!(items.iter().all(|v| v.chunks.len() == 3));
    for model in ModelKind::ALL {
        for task in [Task::Classification, Task::Regression] {
            if model == ModelKind::Hmm && task == Task::Regression {
                continue;
            }
            let report = run_crossval(&items, k, &config(model, task)).unwrap_or_else(|e| panic!("{model} {task:?}: {e}"));
            assert_eq!(report.runs.len(), 6, "{model}");
            assert_eq!(report.video.n_runs, 6);
            for run in &report.runs {
                assert!(run.test_ids.iter().all(|id| !run.train_ids.contains(id) && !run.val_ids.contains(id)));
                assert_eq!(run.train_ids.len() + run.val_ids.len() + run.test_ids.len(), items.len());
                match (model, run.alpha) {
                    (ModelKind::LstmDf, Some(a)) => assert!(((a * 100.0).round() - a * 100.0).abs() < 1e-9),
                    (ModelKind::LstmDf, None) => panic!("fusion run without a weight"),
                    (_, a) => assert_eq!(a, None),
                }
            }
            let (acc, second) = report.video.headline();
            let acc = acc.unwrap().mean;
            assert!((0.0..=1.0).contains(&acc), "{model} {task:?} accuracy {acc}");
            assert!(second.unwrap().mean.is_finite());
        }
    }
}

#[test]
fn hmm_refuses_regression() {
    let (items, k) = corpus();
    assert!(matches!(run_crossval(&items, k, &config(ModelKind::Hmm, Task::Regression)), Err(Error::InvalidConfig(_))));
}

#[test]
fn too_few_videos_for_the_folds() {
    let (items, k) = corpus();
    let cfg = CrossvalConfig { folds: 30, ..config(ModelKind::Constant, Task::Regression) };
    assert!(matches!(run_crossval(&items, k, &cfg), Err(Error::TooFewVideos { .. })));
}
