//! Mini-batch training with class-weighted binary cross entropy, Adam,
//! global-norm gradient clipping and validation-F1 checkpoint selection.

mod adam;
mod backprop;
mod batch;
mod loss;

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use batch::{batch_loss, compute_gradients, make_batches, Batch, Gradients, Objective};
pub use loss::weighted_bce;

use crate::encoder::PageSequence;
use crate::eval::{self, EvalReport, DEFAULT_THRESHOLD};
use crate::model::{self, ModelConfig, ModelParams};
use crate::par::Exec;
use crate::{Error, Result};

/// Which validation score selects the returned checkpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CheckpointMetric {
    #[default]
    ContentF1,
    BoilerplateF1,
}

impl CheckpointMetric {
    pub fn score(self, report: &EvalReport) -> f64 {
        match self {
            CheckpointMetric::ContentF1 => report.positive.f1,
            CheckpointMetric::BoilerplateF1 => report.negative.f1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `(w0, w1)`, normally from [`crate::corpus::class_weights`] on the
    /// training split.
    pub weights: (f64, f64),
    pub seed: u64,
    /// Global gradient norm ceiling.
    pub clip_norm: f64,
    pub threshold: f64,
    pub checkpoint: CheckpointMetric,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            learning_rate: 1e-3,
            weights: (1.0, 1.0),
            seed: 0,
            clip_norm: 5.0,
            threshold: DEFAULT_THRESHOLD,
            checkpoint: CheckpointMetric::ContentF1,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over all blocks seen this epoch.
    pub loss: f64,
    pub val: EvalReport,
    /// Number of updates whose gradient was clipped.
    pub clipped_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch of the returned parameters, `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

impl History {
    /// `epoch<TAB>loss<TAB>val_P<TAB>val_R<TAB>val_F1`, one line per epoch.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.epochs {
            let p = &r.val.positive;
            let _ = writeln!(
                out,
                "{}\t{:.8}\t{:.6}\t{:.6}\t{:.6}",
                r.epoch, r.loss, p.precision, p.recall, p.f1
            );
        }
        out
    }
}

/// Scale `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for (_, t) in grads.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

pub fn train(
    train_pages: &[PageSequence],
    val_pages: &[PageSequence],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<(ModelParams, History)> {
    train_with_observer(train_pages, val_pages, model_config, train_config, |_, _| Ok(()))
}

/// Like [`train`], calling `observer` after every epoch with that epoch's
/// record and parameters (e.g. to write checkpoints).
pub fn train_with_observer(
    train_pages: &[PageSequence],
    val_pages: &[PageSequence],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord, &ModelParams) -> Result<()>,
) -> Result<(ModelParams, History)> {
    model_config.validate()?;
    if train_pages.is_empty() || val_pages.is_empty() {
        return Err(Error::Parameter(
            "training and validation splits must be non-empty".into(),
        ));
    }
    if train_config.batch_size == 0 || train_config.learning_rate.is_nan() || train_config.learning_rate <= 0.0 {
        return Err(Error::Parameter("batch size and learning rate must be positive".into()));
    }
    for page in train_pages.iter().chain(val_pages) {
        if page.matrix.cols() != model_config.d {
            return Err(Error::DimensionMismatch(format!(
                "page `{}` is encoded with d = {}, model has d = {}",
                page.source_id,
                page.matrix.cols(),
                model_config.d
            )));
        }
    }

    let mut params = model::init_params(model_config)?;
    let mut history = History::default();
    if train_config.epochs == 0 {
        return Ok((params, history));
    }

    let objective = Objective {
        weights: train_config.weights,
        dropout_p: model_config.dropout_p,
    };
    let mut optimizer = Adam::new(&params, train_config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=train_config.epochs {
        let batches = make_batches(train_pages, train_config.batch_size, rng.next_u64())?;
        let mut loss_sum = 0.0;
        let mut blocks = 0usize;
        let mut clipped_steps = 0;
        for batch in &batches {
            let mut g = match compute_gradients(batch, &params, &objective, &mut rng, train_config.exec) {
                Ok(g) => g,
                Err(e) if e.is_numerical() => return Err(Error::Divergence { epoch, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            if !g.loss.is_finite() {
                return Err(Error::Divergence { epoch, loss: g.loss });
            }
            loss_sum += g.loss * g.blocks as f64;
            blocks += g.blocks;
            let norm = clip_global_norm(&mut g.grads, train_config.clip_norm);
            if norm > train_config.clip_norm {
                clipped_steps += 1;
                log::debug!(
                    "epoch {epoch}: clipped gradient norm {norm:.3} to {}",
                    train_config.clip_norm
                );
            }
            optimizer.update(&mut params, &g.grads);
        }
        let loss = loss_sum / blocks as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let val = eval::evaluate(val_pages, &params, train_config.threshold, train_config.exec)?;
        let record = EpochRecord {
            epoch,
            loss,
            val,
            clipped_steps,
        };
        if clipped_steps > 0 {
            log::info!("epoch {epoch}: {clipped_steps} of {} updates clipped", batches.len());
        }
        log::info!(
            "epoch {epoch}: loss {loss:.5}, val P/R/F1 {:.4}/{:.4}/{:.4}",
            val.positive.precision,
            val.positive.recall,
            val.positive.f1
        );
        observer(&record, &params)?;
        let score = train_config.checkpoint.score(&val);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, params.clone()));
            history.best_epoch = Some(epoch);
        }
        history.epochs.push(record);
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, history))
}
