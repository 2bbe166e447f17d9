//! Reverse-mode gradients of the weighted loss through the whole network,
//! for a single sequence.

use crate::dom::CONTENT;
use crate::encoder::CountMatrix;
use crate::linalg::{self, Matrix};
use crate::model::{DirectionTrace, ForwardTrace, LstmParams, ModelParams};

use super::loss::weighted_bce_logit;

/// Accumulate into `grads` the gradient of `scale · Σ_t loss_t` and return
/// the unscaled loss sum.
pub(crate) fn backward(
    trace: &ForwardTrace,
    inputs: &CountMatrix,
    labels: &[u8],
    weights: (f64, f64),
    scale: f64,
    params: &ModelParams,
    grads: &mut ModelParams,
) -> f64 {
    let n = labels.len();
    let width = trace.top.cols();
    let mut loss = 0.0;

    // Output head.
    let mut d_top = Matrix::zeros(n, width);
    for (t, &y) in labels.iter().enumerate() {
        let z = trace.logits[t];
        loss += weighted_bce_logit(z, y, weights);
        let (w, target) = if y == CONTENT {
            (weights.1, 1.0)
        } else {
            (weights.0, 0.0)
        };
        let dz = scale * w * (linalg::sigmoid(z) - target);
        linalg::axpy(dz, &trace.head_input(t), &mut grads.out_w);
        grads.out_b += dz;
        let row = d_top.row_mut(t);
        linalg::axpy(dz, &params.out_w, row);
        if let Some(mask) = &trace.dropout {
            for (g, k) in row.iter_mut().zip(mask.row(t)) {
                *g *= k;
            }
        }
    }

    // Bidirectional layers, last to first.
    let mut d_out = d_top;
    for (li, layer) in trace.layers.iter().enumerate().rev() {
        let h = params.layers[li].fwd.hidden();
        let mut d_in = Matrix::zeros(n, layer.input.cols());
        direction_backward(
            &params.layers[li].fwd,
            &layer.fwd,
            &layer.input,
            &d_out,
            0,
            &mut grads.layers[li].fwd,
            &mut d_in,
        );
        direction_backward(
            &params.layers[li].bwd,
            &layer.bwd,
            &layer.input,
            &d_out,
            h,
            &mut grads.layers[li].bwd,
            &mut d_in,
        );
        d_out = d_in;
    }

    // Embedding: only the non-zero input columns receive gradient.
    for t in 0..n {
        let de = d_out.row(t);
        linalg::axpy(1.0, de, &mut grads.embed_bias);
        for (j, c) in inputs.row(t) {
            linalg::axpy(f64::from(c), de, grads.embed.row_mut(j));
        }
    }
    loss
}

/// Backpropagation through time for one direction. `d_out` holds the
/// gradient w.r.t. this direction's hidden outputs in columns
/// `offset..offset + h`.
fn direction_backward(
    w: &LstmParams,
    trace: &DirectionTrace,
    xs: &Matrix,
    d_out: &Matrix,
    offset: usize,
    gw: &mut LstmParams,
    d_in: &mut Matrix,
) {
    let hd = w.hidden();
    let zero = vec![0.0; hd];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    let mut dh = vec![0.0; hd];
    let order: Vec<usize> = trace.order().rev().collect();
    for t in order {
        let gates = trace.gates.row(t);
        let (i, rest) = gates.split_at(hd);
        let (f, rest) = rest.split_at(hd);
        let (g, o) = rest.split_at(hd);
        let c = trace.c.row(t);
        let prev = trace.prev(t);
        let c_prev = prev.map_or(zero.as_slice(), |p| trace.c.row(p));
        let h_prev = prev.map_or(zero.as_slice(), |p| trace.h.row(p));

        for k in 0..hd {
            dh[k] = d_out.get(t, offset + k) + dh_next[k];
            let tc = c[k].tanh();
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * o[k] * (1.0 - tc * tc);
            let d_i = dc * g[k];
            let d_g = dc * i[k];
            let d_f = dc * c_prev[k];
            dc_next[k] = dc * f[k];
            dz[k] = d_i * i[k] * (1.0 - i[k]);
            dz[hd + k] = d_f * f[k] * (1.0 - f[k]);
            dz[2 * hd + k] = d_g * (1.0 - g[k] * g[k]);
            dz[3 * hd + k] = d_o * o[k] * (1.0 - o[k]);
        }

        linalg::axpy(1.0, &dz, &mut gw.bias);
        gw.w_in.outer_acc(xs.row(t), &dz);
        gw.w_rec.outer_acc(h_prev, &dz);
        w.w_in.mul_vec_acc(&dz, d_in.row_mut(t));
        dh_next.fill(0.0);
        w.w_rec.mul_vec_acc(&dz, &mut dh_next);
    }
}
