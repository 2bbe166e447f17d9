use boilerseq::corpus::{build_vocabulary, labeled_page_from_bytes, GOLD_ATTR};
use boilerseq::encoder::{encode_page, CountMatrix, PageSequence};
use boilerseq::model::{init_params, ModelConfig, ModelParams};
use boilerseq::par::Exec;
use boilerseq::synthetic;
use boilerseq::train::{batch_loss, compute_gradients, make_batches, Batch, Objective};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pages(count: usize, d: usize, seed: u64) -> Vec<PageSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(1..9);
            let dense: Vec<Vec<u32>> = (0..n)
                .map(|_| {
                    (0..d)
                        .map(|_| if rng.gen_bool(0.3) { rng.gen_range(1..4) } else { 0 })
                        .collect()
                })
                .collect();
            PageSequence {
                source_id: format!("p{i:02}"),
                blocks: Vec::new(),
                matrix: CountMatrix::from_dense(d, &dense),
                labels: Some((0..n).map(|_| rng.gen_range(0..2)).collect()),
            }
        })
        .collect()
}

fn params(d: usize) -> ModelParams {
    init_params(&ModelConfig {
        d,
        m: 5,
        h: 4,
        layers: 2,
        dropout_p: 0.3,
        seed: 1,
    })
    .unwrap()
}

const OBJECTIVE: Objective = Objective {
    weights: (0.8, 1.3),
    dropout_p: 0.3,
};

#[test]
fn batches_cover_every_page_once() {
    let pages = random_pages(33, 6, 0);
    let batches = make_batches(&pages, 16, 4).unwrap();
    assert_eq!(batches.iter().map(Batch::len).collect::<Vec<_>>(), [16, 16, 1]);
    assert_eq!(batches, make_batches(&pages, 16, 4).unwrap());
    assert_ne!(batches, make_batches(&pages, 16, 5).unwrap());
    let total: usize = batches.iter().map(Batch::unmasked).sum();
    assert_eq!(total, pages.iter().map(PageSequence::len).sum::<usize>());
    for b in &batches {
        for i in 0..b.len() {
            assert_eq!(b.inputs[i].rows(), b.n_max());
            let n = b.real_len(i).unwrap();
            assert!(b.mask[i][..n].iter().all(|&m| m == 1));
            for t in n..b.n_max() {
                assert_eq!(b.inputs[i].row(t).count(), 0);
            }
        }
    }
}

#[test]
fn batched_loss_is_the_mean_of_per_page_sums() {
    let pages = random_pages(9, 7, 1);
    let p = params(7);
    let objective = Objective {
        dropout_p: 0.0,
        ..OBJECTIVE
    };
    let batch = Batch::from_pages(&pages.iter().collect::<Vec<_>>()).unwrap();
    let joint = batch_loss(
        &batch,
        &p,
        &objective,
        &mut ChaCha8Rng::seed_from_u64(0),
        Exec::Sequential,
    )
    .unwrap();
    let mut sum = 0.0;
    let mut blocks = 0;
    for page in &pages {
        let single = Batch::from_pages(&[page]).unwrap();
        sum += page.len() as f64
            * batch_loss(
                &single,
                &p,
                &objective,
                &mut ChaCha8Rng::seed_from_u64(0),
                Exec::Sequential,
            )
            .unwrap();
        blocks += page.len();
    }
    assert!((joint - sum / blocks as f64).abs() <= 1e-6);
}

#[test]
fn padded_rows_do_not_affect_the_loss() {
    let pages = random_pages(4, 5, 2);
    let p = params(5);
    let mut batch = Batch::from_pages(&pages.iter().collect::<Vec<_>>()).unwrap();
    let seed = 31;
    let before = compute_gradients(
        &batch,
        &p,
        &OBJECTIVE,
        &mut ChaCha8Rng::seed_from_u64(seed),
        Exec::Sequential,
    )
    .unwrap();
    for i in 0..batch.len() {
        let n = batch.real_len(i).unwrap();
        let mut dense = batch.inputs[i].to_dense();
        for row in dense.iter_mut().skip(n) {
            row.iter_mut().for_each(|v| *v = 9);
        }
        batch.inputs[i] = CountMatrix::from_dense(5, &dense);
        batch.labels[i][n..].iter_mut().for_each(|l| *l = 1);
    }
    let after = compute_gradients(
        &batch,
        &p,
        &OBJECTIVE,
        &mut ChaCha8Rng::seed_from_u64(seed),
        Exec::Sequential,
    )
    .unwrap();
    assert_eq!(before.loss, after.loss);
    assert_eq!(before.grads, after.grads);
}

#[test]
fn parallel_and_sequential_gradients_are_bit_identical() {
    let pages = random_pages(21, 8, 3);
    let p = params(8);
    for batch in make_batches(&pages, 8, 0).unwrap() {
        let seq = compute_gradients(
            &batch,
            &p,
            &OBJECTIVE,
            &mut ChaCha8Rng::seed_from_u64(5),
            Exec::Sequential,
        )
        .unwrap();
        let par = compute_gradients(
            &batch,
            &p,
            &OBJECTIVE,
            &mut ChaCha8Rng::seed_from_u64(5),
            Exec::Parallel,
        )
        .unwrap();
        assert_eq!(seq.loss.to_bits(), par.loss.to_bits());
        assert_eq!(seq.grads, par.grads);
        assert_eq!(seq.blocks, batch.unmasked());
    }
}

#[test]
fn encoded_synthetic_pages_batch_cleanly() {
    let pages: Vec<_> = synthetic::corpus(5, 3)
        .into_iter()
        .map(|p| labeled_page_from_bytes(&p.source_id, p.html.as_bytes(), GOLD_ATTR).unwrap())
        .collect();
    let vocab = build_vocabulary(&pages, 8, 60).unwrap();
    let seqs: Vec<_> = pages.iter().map(|p| encode_page(p, &vocab).unwrap()).collect();
    let batches = make_batches(&seqs, 2, 0).unwrap();
    assert_eq!(batches.len(), 3);
    let g = compute_gradients(
        &batches[0],
        &params(vocab.d()),
        &OBJECTIVE,
        &mut ChaCha8Rng::seed_from_u64(0),
        Exec::Parallel,
    )
    .unwrap();
    assert!(g.loss.is_finite() && g.loss > 0.0);
}

proptest! {
    #[test]
    fn batch_sizes_partition_the_pages(count in 1usize..60, size in 1usize..20, seed in any::<u64>()) {
        let pages = random_pages(count, 3, seed);
        let batches = make_batches(&pages, size, seed).unwrap();
        prop_assert_eq!(batches.len(), count.div_ceil(size));
        prop_assert!(batches.iter().all(|b| b.len() <= size && !b.is_empty()));
        prop_assert_eq!(batches.iter().map(Batch::len).sum::<usize>(), count);
    }
}
