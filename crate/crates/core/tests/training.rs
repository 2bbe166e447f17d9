use boilerseq::corpus::{
    build_vocabulary, class_weights, labeled_page_from_bytes, split_dataset, SplitSpec, GOLD_ATTR,
};
use boilerseq::encoder::{encode_page, PageSequence};
use boilerseq::eval::evaluate;
use boilerseq::model::{init_params, ModelConfig};
use boilerseq::par::Exec;
use boilerseq::synthetic;
use boilerseq::train::{train, train_with_observer, TrainConfig};
use boilerseq::Error;

struct Data {
    train: Vec<PageSequence>,
    val: Vec<PageSequence>,
    weights: (f64, f64),
    d: usize,
}

fn data(pages: usize, seed: u64) -> Data {
    let labeled: Vec<_> = synthetic::corpus(pages, seed)
        .into_iter()
        .map(|p| labeled_page_from_bytes(&p.source_id, p.html.as_bytes(), GOLD_ATTR).unwrap())
        .collect();
    let spec = SplitSpec {
        train_count: pages - 2,
        val_count: 2,
        test_count: 0,
        seed,
    };
    let split = split_dataset(labeled, &spec).unwrap();
    let vocab = build_vocabulary(&split.train, 10, 80).unwrap();
    let weights = class_weights(&split.train).unwrap();
    let enc = |ps: &[_]| ps.iter().map(|p| encode_page(p, &vocab).unwrap()).collect::<Vec<_>>();
    Data {
        train: enc(&split.train),
        val: enc(&split.val),
        weights,
        d: vocab.d(),
    }
}

fn small(d: usize) -> ModelConfig {
    ModelConfig {
        d,
        m: 8,
        h: 6,
        layers: 1,
        dropout_p: 0.2,
        seed: 11,
    }
}

fn config(epochs: usize, d: &Data) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 3,
        learning_rate: 0.01,
        weights: d.weights,
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let d = data(6, 1);
    let (params, history) = train(&d.train, &d.val, &small(d.d), &config(0, &d)).unwrap();
    assert_eq!(params, init_params(&small(d.d)).unwrap());
    assert!(history.epochs.is_empty());
    assert_eq!(history.best_epoch, None);
}

#[test]
fn training_is_reproducible_across_execution_modes() {
    let d = data(8, 2);
    let mut c = config(3, &d);
    let (a, ha) = train(&d.train, &d.val, &small(d.d), &c).unwrap();
    let (b, hb) = train(&d.train, &d.val, &small(d.d), &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha.to_tsv(), hb.to_tsv());
    c.exec = Exec::Sequential;
    let (s, hs) = train(&d.train, &d.val, &small(d.d), &c).unwrap();
    assert_eq!(a, s);
    assert_eq!(ha.to_tsv(), hs.to_tsv());
    c.seed = 5;
    let (other, _) = train(&d.train, &d.val, &small(d.d), &c).unwrap();
    assert_ne!(a, other);
}

#[test]
fn best_checkpoint_is_the_earliest_maximum() {
    let d = data(8, 3);
    let c = config(6, &d);
    let mut snapshots = Vec::new();
    let (best, history) = train_with_observer(&d.train, &d.val, &small(d.d), &c, |rec, p| {
        snapshots.push((rec.epoch, p.clone()));
        Ok(())
    })
    .unwrap();
    assert_eq!(history.epochs.len(), 6);
    assert_eq!(snapshots.len(), 6);
    let scores: Vec<f64> = history.epochs.iter().map(|e| e.val.positive.f1).collect();
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = scores.iter().position(|&s| s == top).unwrap() + 1;
    assert_eq!(history.best_epoch, Some(first));
    assert_eq!(best, snapshots[first - 1].1);
    for (rec, (epoch, p)) in history.epochs.iter().zip(&snapshots) {
        assert_eq!(rec.epoch, *epoch);
        assert_eq!(rec.val, evaluate(&d.val, p, 0.5, Exec::Sequential).unwrap());
        assert!(rec.loss.is_finite() && rec.loss > 0.0);
    }
    let lines: Vec<_> = history.to_tsv().lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("1\t"));
    assert_eq!(lines[0].split('\t').count(), 5);
}

#[test]
fn loss_decreases_on_a_learnable_corpus() {
    let d = data(10, 4);
    let c = TrainConfig {
        learning_rate: 0.02,
        ..config(15, &d)
    };
    let (_, history) = train(&d.train, &d.val, &small(d.d), &c).unwrap();
    let first = history.epochs.first().unwrap().loss;
    let last = history.epochs.last().unwrap().loss;
    assert!(last < 0.7 * first, "{first} -> {last}");
}

#[test]
fn observer_errors_abort_training() {
    let d = data(6, 5);
    let err = train_with_observer(&d.train, &d.val, &small(d.d), &config(3, &d), |rec, _| {
        if rec.epoch == 2 {
            Err(Error::Parameter("stop".into()))
        } else {
            Ok(())
        }
    })
    .unwrap_err();
    assert!(matches!(err, Error::Parameter(_)));
}

#[test]
fn invalid_configurations_are_rejected() {
    let d = data(6, 6);
    let bad = TrainConfig {
        batch_size: 0,
        ..config(1, &d)
    };
    assert!(matches!(
        train(&d.train, &d.val, &small(d.d), &bad),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        train(&d.train, &[], &small(d.d), &config(1, &d)),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        train(&d.train, &d.val, &small(d.d + 1), &config(1, &d)),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn huge_learning_rate_is_reported_as_divergence_or_survives() {
    let d = data(6, 7);
    let c = TrainConfig {
        learning_rate: 1e30,
        clip_norm: f64::INFINITY,
        ..config(3, &d)
    };
    match train(&d.train, &d.val, &small(d.d), &c) {
        Ok((p, _)) => assert!(p.check_finite().is_ok()),
        Err(e) => assert!(e.is_numerical(), "{e}"),
    }
}
