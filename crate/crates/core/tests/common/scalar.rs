//! Scalar-loop reference network. Reads parameter values element by element
//! and recomputes everything with plain nested loops.

use boilerseq::model::{LstmParams, ModelParams};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn cell(x: &[f64], h_prev: &[f64], c_prev: &[f64], w: &LstmParams) -> (Vec<f64>, Vec<f64>) {
    let hd = h_prev.len();
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    for k in 0..hd {
        // pre-activation of gate `gate` for unit k
        let pre = |gate: usize| {
            let col = gate * hd + k;
            let mut s = w.bias[col];
            for (i, xi) in x.iter().enumerate() {
                s += xi * w.w_in.get(i, col);
            }
            for (j, hj) in h_prev.iter().enumerate() {
                s += hj * w.w_rec.get(j, col);
            }
            s
        };
        let i = sig(pre(0));
        let f = sig(pre(1));
        let g = pre(2).tanh();
        let o = sig(pre(3));
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * c[k].tanh();
    }
    (h, c)
}

/// Two explicit passes: forward left-to-right, backward over the reversed
/// sequence, outputs re-reversed and concatenated per position.
pub fn bilstm(xs: &[Vec<f64>], fwd: &LstmParams, bwd: &LstmParams) -> Vec<Vec<f64>> {
    let hd = fwd.w_rec.rows();
    let mut forward = Vec::new();
    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    for x in xs {
        let (nh, nc) = cell(x, &h, &c, fwd);
        forward.push(nh.clone());
        h = nh;
        c = nc;
    }
    let reversed: Vec<&Vec<f64>> = xs.iter().rev().collect();
    let mut backward = Vec::new();
    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    for x in reversed {
        let (nh, nc) = cell(x, &h, &c, bwd);
        backward.push(nh.clone());
        h = nh;
        c = nc;
    }
    backward.reverse();
    forward
        .into_iter()
        .zip(backward)
        .map(|(mut f, b)| {
            f.extend(b);
            f
        })
        .collect()
}

/// Output of the last bidirectional layer for a dense `n × d` input.
pub fn hidden(dense: &[Vec<u32>], p: &ModelParams) -> Vec<Vec<f64>> {
    let m = p.embed_bias.len();
    let mut seq: Vec<Vec<f64>> = dense
        .iter()
        .map(|row| {
            (0..m)
                .map(|j| {
                    let mut s = p.embed_bias[j];
                    for (i, &cnt) in row.iter().enumerate() {
                        s += f64::from(cnt) * p.embed.get(i, j);
                    }
                    s
                })
                .collect()
        })
        .collect();
    for layer in &p.layers {
        seq = bilstm(&seq, &layer.fwd, &layer.bwd);
    }
    seq
}

/// Inference-mode probabilities for a dense `n × d` input.
pub fn pipeline(dense: &[Vec<u32>], p: &ModelParams) -> Vec<f64> {
    hidden(dense, p)
        .iter()
        .map(|y| {
            let mut z = p.out_b;
            for (a, b) in y.iter().zip(&p.out_w) {
                z += a * b;
            }
            sig(z)
        })
        .collect()
}

/// Weighted BCE of the inference pipeline, summed (not averaged).
pub fn loss_sum(dense: &[Vec<u32>], labels: &[u8], weights: (f64, f64), p: &ModelParams) -> f64 {
    pipeline(dense, p)
        .iter()
        .zip(labels)
        .map(|(&q, &y)| {
            if y == 1 {
                -weights.1 * q.ln()
            } else {
                -weights.0 * (1.0 - q).ln()
            }
        })
        .sum()
}
