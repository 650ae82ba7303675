use kineme::predictors::{seqnet_train, Example, HeadKind, SeqInput, SeqNet, SeqNetSpec, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Keeps only the input branches that `spec` reads.
fn for_spec(examples: &[Example], spec: &SeqNetSpec) -> Vec<Example> {
    examples
        .iter()
        .map(|e| Example {
            input: SeqInput {
                kineme: spec.kineme.and(e.input.kineme.clone()),
                au: spec.au.and(e.input.au.clone()),
            },
            target: e.target,
        })
        .collect()
}

fn random_examples(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let s: Vec<usize> = (0..8).map(|_| rng.random_range(1..=4)).collect();
            let au: Vec<[u8; 17]> = (0..8).map(|_| std::array::from_fn(|_| rng.random_range(0..2))).collect();
            Example {
                input: SeqInput { kineme: Some(SeqInput::one_hot(&s, 4)), au: Some(SeqInput::au_rows(&au)) },
                target: (i % 2) as f64,
            }
        })
        .collect()
}

#[test]
fn single_example_loss_falls_every_epoch() {
    let ex = random_examples(1, 1);
    for spec in [SeqNetSpec::kineme(4, HeadKind::Classification), SeqNetSpec::fusion(4, HeadKind::Classification)] {
        let spec = SeqNetSpec { dropout: 0.0, ..spec };
        let net = SeqNet::new(spec, 3).unwrap();
        let out = seqnet_train(net, &for_spec(&ex, &spec), None, &TrainConfig { epochs: 10, ..Default::default() }).unwrap();
        let losses: Vec<f64> = out.trace.iter().map(|e| e.train_loss).collect();
        assert_eq!(losses.len(), 10);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }
}

#[test]
fn regression_head_fits_one_example() {
    let mut ex = random_examples(1, 2);
    ex[0].target = 0.7;
    let spec = SeqNetSpec { dropout: 0.0, ..SeqNetSpec::au(HeadKind::Regression) };
    let cfg = TrainConfig { epochs: 10, loss: kineme::predictors::LossKind::MeanAbsoluteError, ..Default::default() };
    let out = seqnet_train(SeqNet::new(spec, 0).unwrap(), &for_spec(&ex, &spec), None, &cfg).unwrap();
    assert!(out.trace.last().unwrap().train_loss < out.trace[0].train_loss);
}

#[test]
fn no_dropout_is_bit_reproducible() {
    let data = random_examples(40, 3);
    let spec = SeqNetSpec { dropout: 0.0, ..SeqNetSpec::fusion(4, HeadKind::Classification) };
    let cfg = TrainConfig { epochs: 5, batch_size: 8, seed: 9, ..Default::default() };
    let a = seqnet_train(SeqNet::new(spec, 1).unwrap(), &data[..30], Some(&data[30..]), &cfg).unwrap();
    let b = seqnet_train(SeqNet::new(spec, 1).unwrap(), &data[..30], Some(&data[30..]), &cfg).unwrap();
    assert_eq!(a.net.params, b.net.params);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn dropout_runs_are_reproducible_too() {
    let data = random_examples(40, 4);
    let spec = SeqNetSpec::fusion(4, HeadKind::Classification);
    let cfg = TrainConfig { epochs: 3, batch_size: 8, seed: 2, ..Default::default() };
    let a = seqnet_train(SeqNet::new(spec, 1).unwrap(), &data, None, &cfg).unwrap();
    let b = seqnet_train(SeqNet::new(spec, 1).unwrap(), &data, None, &cfg).unwrap();
    assert_eq!(a.net.params, b.net.params);
}

#[test]
fn early_stopping_keeps_best_validation_weights() {
    // random targets: validation loss stops improving quickly
    let spec = SeqNetSpec::kineme(4, HeadKind::Classification);
    let data = for_spec(&random_examples(60, 5), &spec);
    let cfg = TrainConfig { epochs: 100, patience: 3, batch_size: 16, ..Default::default() };
    let out = seqnet_train(SeqNet::new(spec, 1).unwrap(), &data[..40], Some(&data[40..]), &cfg).unwrap();
    let val: Vec<f64> = out.trace.iter().map(|e| e.val_loss.unwrap()).collect();
    let best = val.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(val[out.best_epoch - 1], best);
    assert!(out.trace.len() < 100);
    assert_eq!(out.trace.len(), out.best_epoch + 3);
    let restored = out.net.mean_loss(&data[40..], cfg.loss).unwrap();
    assert_eq!(restored, best);
}
