use super::LstmParams;
use crate::linalg::{sigmoid, Matrix};
use crate::{Error, Result};

/// Activated gates `[i, f, g, o]` plus new cell and hidden state for one step.
fn step(w: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64], gates: &mut [f64], c: &mut [f64], h: &mut [f64]) {
    let hd = h.len();
    gates.copy_from_slice(&w.bias);
    w.w_in.vec_mul_acc(x, gates);
    w.w_rec.vec_mul_acc(h_prev, gates);
    let (i, rest) = gates.split_at_mut(hd);
    let (f, rest) = rest.split_at_mut(hd);
    let (g, o) = rest.split_at_mut(hd);
    for k in 0..hd {
        i[k] = sigmoid(i[k]);
        f[k] = sigmoid(f[k]);
        g[k] = g[k].tanh();
        o[k] = sigmoid(o[k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        h[k] = o[k] * c[k].tanh();
    }
}

/// One LSTM step: `(h, c)` from input `x` and the previous state.
pub fn lstm_cell(x: &[f64], h_prev: &[f64], c_prev: &[f64], w: &LstmParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let hd = w.hidden();
    if x.len() != w.input_dim()
        || h_prev.len() != hd
        || c_prev.len() != hd
        || w.bias.len() != 4 * hd
        || w.w_rec.cols() != 4 * hd
    {
        return Err(Error::DimensionMismatch(format!(
            "lstm cell with input {} and hidden {hd} got x {}, h {}, c {}",
            w.input_dim(),
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut gates = vec![0.0; 4 * hd];
    let mut c = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    step(w, x, h_prev, c_prev, &mut gates, &mut c, &mut h);
    Ok((h, c))
}

/// States of one direction, indexed by sequence position (not by processing
/// order).
pub(crate) struct DirectionTrace {
    pub reverse: bool,
    /// Activated gates, `n × 4h`.
    pub gates: Matrix,
    pub c: Matrix,
    pub h: Matrix,
}

impl DirectionTrace {
    /// Positions in processing order.
    pub fn order(&self) -> Box<dyn DoubleEndedIterator<Item = usize>> {
        let n = self.h.rows();
        if self.reverse {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        }
    }

    /// The position processed just before `t`, if any.
    pub fn prev(&self, t: usize) -> Option<usize> {
        if self.reverse {
            (t + 1 < self.h.rows()).then_some(t + 1)
        } else {
            t.checked_sub(1)
        }
    }
}

/// Run one direction over every row of `xs`, from a zero state.
pub(crate) fn run_direction(w: &LstmParams, xs: &Matrix, reverse: bool) -> DirectionTrace {
    let n = xs.rows();
    let hd = w.hidden();
    let mut trace = DirectionTrace {
        reverse,
        gates: Matrix::zeros(n, 4 * hd),
        c: Matrix::zeros(n, hd),
        h: Matrix::zeros(n, hd),
    };
    let zero = vec![0.0; hd];
    let order: Vec<usize> = trace.order().collect();
    let mut h_prev = zero.clone();
    let mut c_prev = zero;
    let mut gates = vec![0.0; 4 * hd];
    let mut c = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    for t in order {
        step(w, xs.row(t), &h_prev, &c_prev, &mut gates, &mut c, &mut h);
        trace.gates.row_mut(t).copy_from_slice(&gates);
        trace.c.row_mut(t).copy_from_slice(&c);
        trace.h.row_mut(t).copy_from_slice(&h);
        std::mem::swap(&mut h_prev, &mut h);
        std::mem::swap(&mut c_prev, &mut c);
    }
    trace
}

/// Bidirectional layer: the forward LSTM reads left to right, the backward
/// LSTM reads the reversed sequence, and each position's output is the
/// concatenation `[forward; backward]`.
pub fn bilstm_layer(inputs: &[Vec<f64>], fwd: &LstmParams, bwd: &LstmParams) -> Result<Vec<Vec<f64>>> {
    let Some(first) = inputs.first() else {
        return Err(Error::EmptySequence);
    };
    let in_dim = first.len();
    if inputs.iter().any(|x| x.len() != in_dim) || fwd.input_dim() != in_dim || bwd.input_dim() != in_dim {
        return Err(Error::DimensionMismatch(format!(
            "bidirectional layer expects inputs of width {} / {}",
            fwd.input_dim(),
            bwd.input_dim()
        )));
    }
    let xs = Matrix::from_vec(inputs.len(), in_dim, inputs.concat());
    let f = run_direction(fwd, &xs, false);
    let b = run_direction(bwd, &xs, true);
    Ok((0..inputs.len()).map(|t| [f.h.row(t), b.h.row(t)].concat()).collect())
}
