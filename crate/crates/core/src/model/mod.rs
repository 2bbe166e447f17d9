//! Sequence labeler: sparse input → affine embedding → stacked
//! bidirectional LSTMs → dropout → per-position sigmoid head.
//!
//! Parameters live in `f64` and are kept on the `f32` grid (initialization
//! and every optimizer step round to the nearest `f32`), which makes the
//! 32-bit parameter file lossless.

mod io;
mod lstm;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use io::{decode_params, encode_params, load_params, load_params_expecting, save_params, FORMAT_VERSION, MAGIC};
pub use lstm::{bilstm_layer, lstm_cell};
pub(crate) use lstm::{run_direction, DirectionTrace};

use crate::encoder::CountMatrix;
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Probabilities reported by [`forward`] are clamped into
/// `[PROB_FLOOR, 1 - PROB_FLOOR]` so they stay strictly inside (0, 1).
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// Input dimension, `k + l + 2` of the vocabulary.
    pub d: usize,
    /// Embedding width.
    pub m: usize,
    /// Hidden units per direction.
    pub h: usize,
    pub layers: usize,
    pub dropout_p: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub const DEFAULT_EMBED: usize = 256;
    pub const DEFAULT_HIDDEN: usize = 256;
    pub const DEFAULT_LAYERS: usize = 2;
    pub const DEFAULT_DROPOUT: f64 = 0.5;

    pub fn new(d: usize) -> Self {
        Self {
            d,
            m: Self::DEFAULT_EMBED,
            h: Self::DEFAULT_HIDDEN,
            layers: Self::DEFAULT_LAYERS,
            dropout_p: Self::DEFAULT_DROPOUT,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 || self.h == 0 || self.layers == 0 {
            return Err(Error::Parameter(format!(
                "model dimensions must be positive (d={}, m={}, h={}, layers={})",
                self.d, self.m, self.h, self.layers
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Parameter(format!(
                "dropout probability {} not in [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }

    /// Width of each bidirectional layer's output.
    pub fn output_width(&self) -> usize {
        2 * self.h
    }
}

/// One direction of an LSTM layer. Gate blocks are laid out `[i, f, g, o]`
/// along the `4h` axis.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `in_dim × 4h`
    pub w_in: Matrix,
    /// `h × 4h`
    pub w_rec: Matrix,
    /// `4h`
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(in_dim: usize, h: usize) -> Self {
        Self {
            w_in: Matrix::zeros(in_dim, 4 * h),
            w_rec: Matrix::zeros(h, 4 * h),
            bias: vec![0.0; 4 * h],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_rec.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.rows()
    }

    fn check_shape(&self, in_dim: usize, h: usize, what: &str) -> Result<()> {
        if self.w_in.shape() != (in_dim, 4 * h) || self.w_rec.shape() != (h, 4 * h) || self.bias.len() != 4 * h {
            return Err(Error::ShapeMismatch(format!(
                "{what}: expected input {in_dim}, hidden {h}; got w_in {:?}, w_rec {:?}, bias {}",
                self.w_in.shape(),
                self.w_rec.shape(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLayer {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `d × m`
    pub embed: Matrix,
    /// `m`
    pub embed_bias: Vec<f64>,
    pub layers: Vec<BiLayer>,
    /// `2h`, the single column of the output layer.
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl ModelParams {
    pub fn zeros(d: usize, m: usize, h: usize, layers: usize) -> Self {
        Self {
            embed: Matrix::zeros(d, m),
            embed_bias: vec![0.0; m],
            layers: (0..layers)
                .map(|i| {
                    let in_dim = if i == 0 { m } else { 2 * h };
                    BiLayer {
                        fwd: LstmParams::zeros(in_dim, h),
                        bwd: LstmParams::zeros(in_dim, h),
                    }
                })
                .collect(),
            out_w: vec![0.0; 2 * h],
            out_b: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d(), self.m(), self.h(), self.num_layers())
    }

    pub fn d(&self) -> usize {
        self.embed.rows()
    }

    pub fn m(&self) -> usize {
        self.embed.cols()
    }

    pub fn h(&self) -> usize {
        self.layers.first().map_or(self.out_w.len() / 2, |l| l.fwd.hidden())
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Verify every block against the shape implied by `(d, m, h, layers)`,
    /// including the stacking contract (layer `i > 1` consumes `2h`).
    pub fn validate(&self) -> Result<()> {
        let (m, h) = (self.m(), self.h());
        if self.d() == 0 || m == 0 || h == 0 || self.layers.is_empty() {
            return Err(Error::ShapeMismatch("all dimensions must be positive".into()));
        }
        if self.embed_bias.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "embedding bias has {} entries, expected {m}",
                self.embed_bias.len()
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let in_dim = if i == 0 { m } else { 2 * h };
            layer.fwd.check_shape(in_dim, h, &format!("layer {} forward", i + 1))?;
            layer.bwd.check_shape(in_dim, h, &format!("layer {} backward", i + 1))?;
        }
        if self.out_w.len() != 2 * h {
            return Err(Error::ShapeMismatch(format!(
                "output layer has {} rows, expected {}",
                self.out_w.len(),
                2 * h
            )));
        }
        Ok(())
    }

    /// Named parameter blocks in file order: embedding, embedding bias,
    /// then per layer the forward set and the backward set (input weights,
    /// recurrent weights, bias), then the output weights and bias.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("embed".into(), self.embed.as_slice()),
            ("embed_bias".into(), &self.embed_bias),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (dir, p) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                out.push((format!("layer{}.{dir}.w_in", i + 1), p.w_in.as_slice()));
                out.push((format!("layer{}.{dir}.w_rec", i + 1), p.w_rec.as_slice()));
                out.push((format!("layer{}.{dir}.bias", i + 1), &p.bias));
            }
        }
        out.push(("out_w".into(), &self.out_w));
        out.push(("out_b".into(), std::slice::from_ref(&self.out_b)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("embed".into(), self.embed.as_mut_slice()),
            ("embed_bias".into(), &mut self.embed_bias),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (dir, p) in [("fwd", &mut layer.fwd), ("bwd", &mut layer.bwd)] {
                out.push((format!("layer{}.{dir}.w_in", i + 1), p.w_in.as_mut_slice()));
                out.push((format!("layer{}.{dir}.w_rec", i + 1), p.w_rec.as_mut_slice()));
                out.push((format!("layer{}.{dir}.bias", i + 1), &mut p.bias));
            }
        }
        out.push(("out_w".into(), &mut self.out_w));
        out.push(("out_b".into(), std::slice::from_mut(&mut self.out_b)));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(())
    }

    /// `self += scale * other`, block by block.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            linalg::axpy(scale, src, dst);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|(_, t)| t.iter()).map(|v| v * v).sum()
    }

    /// Round every entry to the nearest `f32`.
    pub fn round_to_storage(&mut self) {
        for (_, t) in self.tensors_mut() {
            for v in t {
                *v = f64::from(*v as f32);
            }
        }
    }
}

/// Uniform Glorot initialization from a seeded generator. Biases start at
/// zero except the forget gate, which starts at one.
pub fn init_params(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let (d, m, h) = (config.d, config.m, config.h);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut p = ModelParams::zeros(d, m, h, config.layers);

    fn glorot(rng: &mut ChaCha8Rng, values: &mut [f64], fan_in: usize, fan_out: usize) {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in values {
            *v = rng.gen_range(-bound..bound);
        }
    }

    glorot(&mut rng, p.embed.as_mut_slice(), d, m);
    for layer in &mut p.layers {
        for dir in [&mut layer.fwd, &mut layer.bwd] {
            let in_dim = dir.input_dim();
            glorot(&mut rng, dir.w_in.as_mut_slice(), in_dim, 4 * h);
            glorot(&mut rng, dir.w_rec.as_mut_slice(), h, 4 * h);
            dir.bias[h..2 * h].fill(1.0);
        }
    }
    glorot(&mut rng, &mut p.out_w, 2 * h, 1);
    p.round_to_storage();
    Ok(p)
}

/// Forward-pass mode. Dropout is applied only in training.
pub enum Mode<'a> {
    Infer,
    Train { dropout_p: f64, rng: &'a mut dyn RngCore },
}

/// Per-layer intermediate values kept for backpropagation.
pub(crate) struct LayerTrace {
    pub input: Matrix,
    pub fwd: DirectionTrace,
    pub bwd: DirectionTrace,
}

pub(crate) struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    /// Output of the last bidirectional layer, before dropout.
    pub top: Matrix,
    /// Inverted-dropout multipliers (`0` or `1 / (1 - p)`), when active.
    pub dropout: Option<Matrix>,
    pub logits: Vec<f64>,
}

impl ForwardTrace {
    /// Row `t` of the final hidden representation fed to the output layer.
    pub fn head_input(&self, t: usize) -> Vec<f64> {
        match &self.dropout {
            Some(mask) => self.top.row(t).iter().zip(mask.row(t)).map(|(a, b)| a * b).collect(),
            None => self.top.row(t).to_vec(),
        }
    }
}

/// Full forward pass over the first `n` rows of `inputs`.
pub(crate) fn forward_trace(
    inputs: &CountMatrix,
    n: usize,
    params: &ModelParams,
    mode: Mode<'_>,
) -> Result<ForwardTrace> {
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    if inputs.cols() != params.d() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} columns, model expects d = {}",
            inputs.cols(),
            params.d()
        )));
    }
    let m = params.m();
    let mut embedded = Matrix::zeros(n, m);
    for t in 0..n {
        let row = embedded.row_mut(t);
        row.copy_from_slice(&params.embed_bias);
        for (j, c) in inputs.row(t) {
            linalg::axpy(f64::from(c), params.embed.row(j), row);
        }
    }

    let mut layers = Vec::with_capacity(params.num_layers());
    let mut current = embedded;
    for layer in &params.layers {
        let fwd = run_direction(&layer.fwd, &current, false);
        let bwd = run_direction(&layer.bwd, &current, true);
        let h = layer.fwd.hidden();
        let mut out = Matrix::zeros(n, 2 * h);
        for t in 0..n {
            let row = out.row_mut(t);
            row[..h].copy_from_slice(fwd.h.row(t));
            row[h..].copy_from_slice(bwd.h.row(t));
        }
        layers.push(LayerTrace {
            input: current,
            fwd,
            bwd,
        });
        current = out;
    }
    let top = current;

    let dropout = match mode {
        Mode::Train { dropout_p, rng } if dropout_p > 0.0 => {
            if !(0.0..1.0).contains(&dropout_p) {
                return Err(Error::Parameter(format!(
                    "dropout probability {dropout_p} not in [0, 1)"
                )));
            }
            let keep = 1.0 / (1.0 - dropout_p);
            let mut mask = Matrix::zeros(top.rows(), top.cols());
            for v in mask.as_mut_slice() {
                *v = if rng.gen::<f64>() < dropout_p { 0.0 } else { keep };
            }
            Some(mask)
        }
        _ => None,
    };

    let mut trace = ForwardTrace {
        layers,
        top,
        dropout,
        logits: Vec::with_capacity(n),
    };
    for t in 0..n {
        let z = linalg::dot(&trace.head_input(t), &params.out_w) + params.out_b;
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("logit at position {t}")));
        }
        trace.logits.push(z);
    }
    Ok(trace)
}

pub(crate) fn probability(logit: f64) -> f64 {
    linalg::sigmoid(logit).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Content probability for every row of `inputs`.
pub fn forward(inputs: &CountMatrix, params: &ModelParams, mode: Mode<'_>) -> Result<Vec<f64>> {
    params.check_finite()?;
    params.validate()?;
    let trace = forward_trace(inputs, inputs.rows(), params, mode)?;
    Ok(trace.logits.into_iter().map(probability).collect())
}

/// Deterministic inference.
pub fn infer(inputs: &CountMatrix, params: &ModelParams) -> Result<Vec<f64>> {
    forward(inputs, params, Mode::Infer)
}
