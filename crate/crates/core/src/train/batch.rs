use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backprop::backward;
use super::loss::weighted_bce_logit;
use crate::encoder::{CountMatrix, PageSequence};
use crate::model::{self, Mode, ModelParams};
use crate::par::Exec;
use crate::{Error, Result};

/// Pages padded to a common length. `mask[i][t]` is 1 exactly for the real
/// blocks of page `i`; padded rows are empty and never read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub inputs: Vec<CountMatrix>,
    pub mask: Vec<Vec<u8>>,
    pub labels: Vec<Vec<u8>>,
}

impl Batch {
    pub fn from_pages(pages: &[&PageSequence]) -> Result<Self> {
        let n_max = pages.iter().map(|p| p.len()).max().unwrap_or(0);
        let mut batch = Batch {
            inputs: Vec::with_capacity(pages.len()),
            mask: Vec::with_capacity(pages.len()),
            labels: Vec::with_capacity(pages.len()),
        };
        for page in pages {
            let labels = page
                .labels
                .as_ref()
                .ok_or_else(|| Error::Parameter(format!("page `{}` is unlabeled", page.source_id)))?;
            let pad = n_max - page.len();
            batch.inputs.push(page.matrix.padded(pad));
            let mut mask = vec![1u8; page.len()];
            mask.resize(n_max, 0);
            batch.mask.push(mask);
            let mut l = labels.clone();
            l.resize(n_max, 0);
            batch.labels.push(l);
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_max(&self) -> usize {
        self.mask.first().map_or(0, Vec::len)
    }

    /// Real length of row `i`. Real positions must form a prefix.
    pub fn real_len(&self, i: usize) -> Result<usize> {
        let mask = &self.mask[i];
        let n = mask.iter().take_while(|&&m| m != 0).count();
        if mask[n..].iter().any(|&m| m != 0) {
            return Err(Error::Parameter(format!("mask of batch row {i} is not a prefix")));
        }
        Ok(n)
    }

    pub fn unmasked(&self) -> usize {
        self.mask.iter().flatten().filter(|&&m| m != 0).count()
    }
}

/// Seeded shuffle of `pages` into batches of `batch_size` (the last one may
/// be smaller).
pub fn make_batches(pages: &[PageSequence], batch_size: usize, seed: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".into()));
    }
    if pages.is_empty() {
        return Err(Error::Parameter("no pages to batch".into()));
    }
    let mut order: Vec<usize> = (0..pages.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
        .chunks(batch_size)
        .map(|idx| Batch::from_pages(&idx.iter().map(|&i| &pages[i]).collect::<Vec<_>>()))
        .collect()
}

/// What is being minimized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    /// `(w0, w1)` class weights.
    pub weights: (f64, f64),
    pub dropout_p: f64,
}

#[derive(Clone, Debug)]
pub struct Gradients {
    /// Mean weighted loss over the batch's unmasked positions.
    pub loss: f64,
    pub blocks: usize,
    pub grads: ModelParams,
}

/// Loss and exact gradients for one batch.
///
/// One dropout seed per page is drawn from `rng` up front, so the masks (and
/// therefore the result) do not depend on `exec`. Per-page gradients are
/// summed in page order.
pub fn compute_gradients(
    batch: &Batch,
    params: &ModelParams,
    objective: &Objective,
    rng: &mut dyn RngCore,
    exec: Exec,
) -> Result<Gradients> {
    let (loss, blocks, grads) = run(batch, params, objective, rng, exec, true)?;
    let grads = grads.expect("gradients requested");
    grads.check_finite()?;
    Ok(Gradients { loss, blocks, grads })
}

/// The loss [`compute_gradients`] would report for the same `rng` state.
pub fn batch_loss(
    batch: &Batch,
    params: &ModelParams,
    objective: &Objective,
    rng: &mut dyn RngCore,
    exec: Exec,
) -> Result<f64> {
    run(batch, params, objective, rng, exec, false).map(|(loss, _, _)| loss)
}

fn run(
    batch: &Batch,
    params: &ModelParams,
    objective: &Objective,
    rng: &mut dyn RngCore,
    exec: Exec,
    with_grads: bool,
) -> Result<(f64, usize, Option<ModelParams>)> {
    params.validate()?;
    params.check_finite()?;
    let total = batch.unmasked();
    if total == 0 {
        return Err(Error::EmptySequence);
    }
    let scale = 1.0 / total as f64;
    let jobs: Vec<(usize, u64)> = (0..batch.len()).map(|i| (i, rng.next_u64())).collect();

    let page = |&(i, seed): &(usize, u64)| -> Result<Option<(f64, Option<ModelParams>)>> {
        let n = batch.real_len(i)?;
        if n == 0 {
            return Ok(None);
        }
        let mut page_rng = ChaCha8Rng::seed_from_u64(seed);
        let mode = Mode::Train {
            dropout_p: objective.dropout_p,
            rng: &mut page_rng,
        };
        let trace = model::forward_trace(&batch.inputs[i], n, params, mode)?;
        let labels = &batch.labels[i][..n];
        if with_grads {
            let mut g = params.zeros_like();
            let loss = backward(
                &trace,
                &batch.inputs[i],
                labels,
                objective.weights,
                scale,
                params,
                &mut g,
            );
            Ok(Some((loss, Some(g))))
        } else {
            let loss = labels
                .iter()
                .zip(&trace.logits)
                .map(|(&y, &z)| weighted_bce_logit(z, y, objective.weights))
                .sum();
            Ok(Some((loss, None)))
        }
    };

    let mut loss_sum = 0.0;
    let mut acc = with_grads.then(|| params.zeros_like());
    for wave in jobs.chunks(exec.wave_size()) {
        for result in exec.map(wave, page) {
            let Some((loss, g)) = result? else { continue };
            loss_sum += loss;
            if let (Some(acc), Some(g)) = (acc.as_mut(), g) {
                acc.add_scaled(&g, 1.0);
            }
        }
    }
    Ok((loss_sum * scale, total, acc))
}
