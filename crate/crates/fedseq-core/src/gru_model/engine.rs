//! Batched GRU engine.
//!
//! Sequences in a batch are processed in descending-length order, so at
//! every timestep the active rows form a contiguous prefix and padded
//! steps cost nothing and touch nothing. The reordering is internal:
//! logits come back in the original batch order, and per-sequence results
//! are arithmetic-identical to running each sequence alone, because every
//! row is computed by the same per-row operation sequence regardless of
//! batch composition.
//!
//! Activation blocks are row-major (rows = sequences); the weight blocks
//! of `GruParams` are transposed once per call into right-multiplication
//! form for the forward pass, while the backward pass reads the spec-
//! oriented blocks directly and accumulates weight gradients in their
//! natural shapes.

use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, GruParams, Pooling};
use crate::batching::Batch;
use crate::kernels::{gemm_acc, gemm_at_acc, sigmoid_inplace, tanh_inplace};
use crate::numerics::{exp, Matrix, PROB_FLOOR};

/// Scratch and activation storage reused across batches by one worker.
///
/// After a recording forward pass this holds the full per-step activation
/// history (the "cached activations"), which `backward` then consumes.
pub struct Workspace {
    // packing
    order: Vec<usize>,
    inv_order: Vec<usize>,
    sorted_len: Vec<usize>,
    active: Vec<usize>,
    offs: Vec<usize>,
    // per-step blocks, rows = sequences (sorted order)
    h: Vec<f64>,
    az: Vec<f64>,
    ar: Vec<f64>,
    ac: Vec<f64>,
    rh: Vec<f64>,
    xb: Vec<f64>,
    pooled: Vec<f64>,
    zeros: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    dh: Vec<f64>,
    inject: Vec<f64>,
    drh: Vec<f64>,
    // step-indexed activation history (prefix rows per step)
    hist_h: Vec<f64>,
    hist_z: Vec<f64>,
    hist_r: Vec<f64>,
    hist_c: Vec<f64>,
    // transposed weights for the forward pass
    wt_z: Vec<f64>,
    wt_r: Vec<f64>,
    wt_h: Vec<f64>,
    ut_z: Vec<f64>,
    ut_r: Vec<f64>,
    ut_h: Vec<f64>,
    wt_out: Vec<f64>,
    recorded: bool,
}

impl Workspace {
    pub fn new() -> Self {
        Workspace {
            order: Vec::new(),
            inv_order: Vec::new(),
            sorted_len: Vec::new(),
            active: Vec::new(),
            offs: Vec::new(),
            h: Vec::new(),
            az: Vec::new(),
            ar: Vec::new(),
            ac: Vec::new(),
            rh: Vec::new(),
            xb: Vec::new(),
            pooled: Vec::new(),
            zeros: Vec::new(),
            logits: Vec::new(),
            probs: Vec::new(),
            dh: Vec::new(),
            inject: Vec::new(),
            drh: Vec::new(),
            hist_h: Vec::new(),
            hist_z: Vec::new(),
            hist_r: Vec::new(),
            hist_c: Vec::new(),
            wt_z: Vec::new(),
            wt_r: Vec::new(),
            wt_h: Vec::new(),
            ut_z: Vec::new(),
            ut_r: Vec::new(),
            ut_h: Vec::new(),
            wt_out: Vec::new(),
            recorded: false,
        }
    }
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace::new()
    }
}

fn reset(buf: &mut Vec<f64>, len: usize) {
    buf.clear();
    buf.resize(len, 0.0);
}

fn transpose_into(dst: &mut Vec<f64>, m: &Matrix) {
    let (r, c) = (m.rows(), m.cols());
    reset(dst, r * c);
    let src = m.as_slice();
    for i in 0..r {
        for j in 0..c {
            dst[j * r + i] = src[i * c + j];
        }
    }
}

/// Copy `bias` into each of the first `rows` rows of `dst`.
fn bias_rows(dst: &mut [f64], bias: &[f64], rows: usize) {
    let n = bias.len();
    for s in 0..rows {
        dst[s * n..(s + 1) * n].copy_from_slice(bias);
    }
}

fn col_sums_into(dst: &mut [f64], src: &[f64], rows: usize, cols: usize) {
    for s in 0..rows {
        let row = &src[s * cols..(s + 1) * cols];
        for (d, v) in dst.iter_mut().zip(row) {
            *d += v;
        }
    }
}

fn prepare(ws: &mut Workspace, batch: &Batch, p: &GruParams, pooling: Pooling, record: bool) {
    let b = batch.size();
    let h = p.dims.hidden;
    let d = p.dims.input;
    let k = p.dims.classes;
    assert_eq!(
        batch.dim, d,
        "batch feature width {} does not match model d={}",
        batch.dim, d
    );

    ws.order.clear();
    ws.order.extend(0..b);
    let lengths = &batch.lengths;
    ws.order.sort_by(|&a, &c| lengths[c].cmp(&lengths[a]).then(a.cmp(&c)));
    ws.inv_order.clear();
    ws.inv_order.resize(b, 0);
    for (s, &o) in ws.order.iter().enumerate() {
        ws.inv_order[o] = s;
    }
    ws.sorted_len.clear();
    ws.sorted_len.extend(ws.order.iter().map(|&o| lengths[o]));

    let t_max = batch.t_max;
    ws.active.clear();
    ws.active.resize(t_max, 0);
    let mut ptr = b;
    for t in 0..t_max {
        while ptr > 0 && ws.sorted_len[ptr - 1] <= t {
            ptr -= 1;
        }
        ws.active[t] = ptr;
    }
    ws.offs.clear();
    ws.offs.resize(t_max + 1, 0);
    for t in 0..t_max {
        ws.offs[t + 1] = ws.offs[t] + ws.active[t];
    }

    reset(&mut ws.h, b * h);
    reset(&mut ws.az, b * h);
    reset(&mut ws.ar, b * h);
    reset(&mut ws.ac, b * h);
    reset(&mut ws.rh, b * h);
    reset(&mut ws.xb, b * d);
    reset(&mut ws.zeros, b * h);
    reset(&mut ws.logits, b * k);
    if pooling == Pooling::Mean {
        reset(&mut ws.pooled, b * h);
    }
    if record {
        let total = ws.offs[t_max];
        reset(&mut ws.hist_h, total * h);
        reset(&mut ws.hist_z, total * h);
        reset(&mut ws.hist_r, total * h);
        reset(&mut ws.hist_c, total * h);
    }
    ws.recorded = record;

    transpose_into(&mut ws.wt_z, &p.w_z);
    transpose_into(&mut ws.wt_r, &p.w_r);
    transpose_into(&mut ws.wt_h, &p.w_h);
    transpose_into(&mut ws.ut_z, &p.u_z);
    transpose_into(&mut ws.ut_r, &p.u_r);
    transpose_into(&mut ws.ut_h, &p.u_h);
    transpose_into(&mut ws.wt_out, &p.w_out);
}

fn gather_inputs(ws: &mut Workspace, batch: &Batch, t: usize, bt: usize) {
    let b = batch.size();
    let d = batch.dim;
    for s in 0..bt {
        let o = ws.order[s];
        let src = &batch.features[(t * b + o) * d..(t * b + o + 1) * d];
        ws.xb[s * d..(s + 1) * d].copy_from_slice(src);
    }
}

/// Forward pass. Returns per-sequence logits in the original batch order;
/// with `record` the activation history stays in the workspace for
/// [`backward`].
pub(crate) fn forward(
    ws: &mut Workspace,
    batch: &Batch,
    p: &GruParams,
    pooling: Pooling,
    record: bool,
) -> Matrix {
    let b = batch.size();
    let h = p.dims.hidden;
    let d = p.dims.input;
    let k = p.dims.classes;
    prepare(ws, batch, p, pooling, record);

    for t in 0..batch.t_max {
        let bt = ws.active[t];
        if bt == 0 {
            break;
        }
        gather_inputs(ws, batch, t, bt);

        bias_rows(&mut ws.az, p.b_z.as_slice(), bt);
        gemm_acc(&mut ws.az[..bt * h], &ws.xb[..bt * d], &ws.wt_z, bt, d, h);
        if t > 0 {
            gemm_acc(&mut ws.az[..bt * h], &ws.h[..bt * h], &ws.ut_z, bt, h, h);
        }
        sigmoid_inplace(&mut ws.az[..bt * h]);

        bias_rows(&mut ws.ar, p.b_r.as_slice(), bt);
        gemm_acc(&mut ws.ar[..bt * h], &ws.xb[..bt * d], &ws.wt_r, bt, d, h);
        if t > 0 {
            gemm_acc(&mut ws.ar[..bt * h], &ws.h[..bt * h], &ws.ut_r, bt, h, h);
        }
        sigmoid_inplace(&mut ws.ar[..bt * h]);

        bias_rows(&mut ws.ac, p.b_h.as_slice(), bt);
        gemm_acc(&mut ws.ac[..bt * h], &ws.xb[..bt * d], &ws.wt_h, bt, d, h);
        if t > 0 {
            for i in 0..bt * h {
                ws.rh[i] = ws.ar[i] * ws.h[i];
            }
            gemm_acc(&mut ws.ac[..bt * h], &ws.rh[..bt * h], &ws.ut_h, bt, h, h);
        }
        tanh_inplace(&mut ws.ac[..bt * h]);

        // h <- (1 - z) . h + z . c
        for i in 0..bt * h {
            let z = ws.az[i];
            ws.h[i] = (1.0 - z) * ws.h[i] + z * ws.ac[i];
        }

        if record {
            let base = ws.offs[t] * h;
            ws.hist_h[base..base + bt * h].copy_from_slice(&ws.h[..bt * h]);
            ws.hist_z[base..base + bt * h].copy_from_slice(&ws.az[..bt * h]);
            ws.hist_r[base..base + bt * h].copy_from_slice(&ws.ar[..bt * h]);
            ws.hist_c[base..base + bt * h].copy_from_slice(&ws.ac[..bt * h]);
        }
        if pooling == Pooling::Mean {
            for i in 0..bt * h {
                ws.pooled[i] += ws.h[i];
            }
        }
    }

    // every row now holds the sequence's final state; condense and classify
    if pooling == Pooling::Mean {
        for s in 0..b {
            let inv_len = 1.0 / ws.sorted_len[s] as f64;
            for v in &mut ws.pooled[s * h..(s + 1) * h] {
                *v *= inv_len;
            }
        }
    }
    bias_rows(&mut ws.logits, p.b_out.as_slice(), b);
    let condensed = if pooling == Pooling::Mean { &ws.pooled } else { &ws.h };
    gemm_acc(&mut ws.logits, condensed, &ws.wt_out, b, h, k);

    let mut out = vec![0.0; b * k];
    for s in 0..b {
        let o = ws.order[s];
        out[o * k..(o + 1) * k].copy_from_slice(&ws.logits[s * k..(s + 1) * k]);
    }
    Matrix::from_vec(b, k, out)
}

fn softmax_rows_into(probs: &mut Vec<f64>, logits: &[f64], rows: usize, cols: usize) {
    reset(probs, rows * cols);
    for s in 0..rows {
        let row = &logits[s * cols..(s + 1) * cols];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| if x > m { x } else { m });
        let out = &mut probs[s * cols..(s + 1) * cols];
        let mut sum = 0.0;
        for (o, &x) in out.iter_mut().zip(row) {
            *o = exp(x - max);
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    }
}

/// Mean cross-entropy over the batch plus exact full-length BPTT
/// gradients, averaged over the batch. Requires a recording [`forward`]
/// on the same workspace immediately before.
pub(crate) fn backward(
    ws: &mut Workspace,
    batch: &Batch,
    p: &GruParams,
    pooling: Pooling,
) -> (f64, Gradients) {
    assert!(ws.recorded, "backward without a recording forward pass");
    ws.recorded = false;
    let b = batch.size();
    let h = p.dims.hidden;
    let d = p.dims.input;
    let k = p.dims.classes;

    softmax_rows_into(&mut ws.probs, &ws.logits, b, k);

    // mean loss, summed in original batch order
    let mut loss = 0.0;
    for o in 0..b {
        let s = ws.inv_order[o];
        let pl = ws.probs[s * k + batch.labels[o]].max(PROB_FLOOR);
        loss -= libm::log(pl);
    }
    loss /= b as f64;

    // dlogits rows (sorted order), pre-scaled by 1/B
    let scale = 1.0 / b as f64;
    let dlg = &mut ws.logits; // reuse: overwrite logits with their gradient
    for s in 0..b {
        let label = batch.labels[ws.order[s]];
        for c in 0..k {
            let y = if c == label { 1.0 } else { 0.0 };
            dlg[s * k + c] = (ws.probs[s * k + c] - y) * scale;
        }
    }

    let mut grads = Gradients::zeros(p.dims);

    // classifier head
    let condensed = if pooling == Pooling::Mean { &ws.pooled } else { &ws.h };
    gemm_at_acc(grads.w_out.as_mut_slice(), dlg, condensed, b, k, h);
    col_sums_into(grads.b_out.as_mut_slice(), dlg, b, k);
    reset(&mut ws.dh, b * h);
    gemm_acc(&mut ws.dh, dlg, p.w_out.as_slice(), b, k, h);

    if pooling == Pooling::Mean {
        // each active step receives an equal share of the pooled gradient
        reset(&mut ws.inject, b * h);
        for s in 0..b {
            let inv_len = 1.0 / ws.sorted_len[s] as f64;
            for j in 0..h {
                ws.inject[s * h + j] = ws.dh[s * h + j] * inv_len;
            }
        }
        ws.dh[..b * h].fill(0.0);
    }

    reset(&mut ws.drh, b * h);
    let t_used = ws.active.len();
    for t in (0..t_used).rev() {
        let bt = ws.active[t];
        if bt == 0 {
            continue;
        }
        let base = ws.offs[t] * h;
        if pooling == Pooling::Mean {
            for i in 0..bt * h {
                ws.dh[i] += ws.inject[i];
            }
        }

        // borrow history blocks for this step
        let (z, r, c) = (
            &ws.hist_z[base..base + bt * h],
            &ws.hist_r[base..base + bt * h],
            &ws.hist_c[base..base + bt * h],
        );
        let hprev: &[f64] = if t > 0 {
            let pbase = ws.offs[t - 1] * h;
            &ws.hist_h[pbase..pbase + bt * h]
        } else {
            &ws.zeros[..bt * h]
        };

        // dac = dh . z . (1 - c^2); daz = dh . (c - hprev) . z . (1 - z)
        for i in 0..bt * h {
            let dh = ws.dh[i];
            ws.ac[i] = dh * z[i] * (1.0 - c[i] * c[i]);
            ws.az[i] = dh * (c[i] - hprev[i]) * z[i] * (1.0 - z[i]);
        }

        gather_inputs(ws, batch, t, bt);
        gemm_at_acc(grads.w_z.as_mut_slice(), &ws.az[..bt * h], &ws.xb[..bt * d], bt, h, d);
        col_sums_into(grads.b_z.as_mut_slice(), &ws.az[..bt * h], bt, h);
        gemm_at_acc(grads.w_h.as_mut_slice(), &ws.ac[..bt * h], &ws.xb[..bt * d], bt, h, d);
        col_sums_into(grads.b_h.as_mut_slice(), &ws.ac[..bt * h], bt, h);

        if t > 0 {
            // drh = dac U_h^T; reset only the active rows
            ws.drh[..bt * h].fill(0.0);
            gemm_acc(&mut ws.drh[..bt * h], &ws.ac[..bt * h], p.u_h.as_slice(), bt, h, h);
            // dar = drh . hprev . r . (1 - r)
            for i in 0..bt * h {
                ws.ar[i] = ws.drh[i] * hprev[i] * r[i] * (1.0 - r[i]);
            }
            // dh -> dh_prev: through the leak gate and the reset product
            for i in 0..bt * h {
                ws.dh[i] = ws.dh[i] * (1.0 - z[i]) + ws.drh[i] * r[i];
            }
            gemm_acc(&mut ws.dh[..bt * h], &ws.az[..bt * h], p.u_z.as_slice(), bt, h, h);
            gemm_acc(&mut ws.dh[..bt * h], &ws.ar[..bt * h], p.u_r.as_slice(), bt, h, h);

            gemm_at_acc(grads.u_z.as_mut_slice(), &ws.az[..bt * h], hprev, bt, h, h);
            gemm_at_acc(grads.u_r.as_mut_slice(), &ws.ar[..bt * h], hprev, bt, h, h);
            for i in 0..bt * h {
                ws.rh[i] = r[i] * hprev[i];
            }
            gemm_at_acc(grads.u_h.as_mut_slice(), &ws.ac[..bt * h], &ws.rh[..bt * h], bt, h, h);

            gemm_at_acc(grads.w_r.as_mut_slice(), &ws.ar[..bt * h], &ws.xb[..bt * d], bt, h, d);
            col_sums_into(grads.b_r.as_mut_slice(), &ws.ar[..bt * h], bt, h);
        }
    }

    (loss, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batching::{materialize, Batch};
    use crate::gru_model::{forward_with, gru_step, init_params, GruDims};
    use crate::numerics::Vector;
    use crate::rng::Rng;
    use crate::sequence_data::{ClientDataset, LabeledSequence};

    fn random_client(seed: u64, lengths: &[usize], d: usize, k: usize) -> ClientDataset {
        let mut rng = Rng::new(seed);
        let examples = lengths
            .iter()
            .map(|&len| LabeledSequence {
                features: (0..len * d).map(|_| rng.range_f64(-1.0, 1.0)).collect(),
                length: len,
                dim: d,
                label: rng.next_below(k as u64) as usize,
            })
            .collect();
        ClientDataset { client_id: 0, examples }
    }

    #[test]
    fn batched_forward_matches_gru_step_loop() {
        let dims = GruDims::new(2, 6, 4);
        let p = init_params(dims, 3);
        let client = random_client(8, &[7], 2, 4);
        let batch = materialize(&client, &[0]);
        let mut ws = Workspace::new();
        let logits = forward_with(&mut ws, &batch, &p, Pooling::Final);

        // reference: scalar step loop then the classifier head
        let ex = &client.examples[0];
        let mut hidden = Vector::zeros(6);
        for t in 0..ex.length {
            let x = Vector::from_vec(ex.features[t * 2..(t + 1) * 2].to_vec());
            hidden = gru_step(&x, &hidden, &p);
        }
        for c in 0..4 {
            let mut want = p.b_out[c];
            for j in 0..6 {
                want += p.w_out.get(c, j) * hidden[j];
            }
            assert!(
                (logits.get(0, c) - want).abs() < 1e-12,
                "logit {c}: {} vs {}",
                logits.get(0, c),
                want
            );
        }
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let dims = GruDims::new(1, 5, 3);
        let p = crate::gru_model::unflatten(
            &crate::gru_model::ParamVector::zeros(dims.param_len()),
            dims,
        );
        let client = random_client(2, &[4, 9, 2], 1, 3);
        let batch = materialize(&client, &[0, 1, 2]);
        let logits = crate::gru_model::forward(&batch, &p);
        assert!(logits.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mixed_batch_logits_equal_singletons_exactly() {
        let dims = GruDims::new(1, 16, 5);
        let p = init_params(dims, 10);
        let client = random_client(20, &[3, 17, 9, 9, 25, 1], 1, 5);
        let all: Vec<usize> = (0..6).collect();
        let batch = materialize(&client, &all);
        let mut ws = Workspace::new();
        let batched = forward_with(&mut ws, &batch, &p, Pooling::Final);
        for j in 0..6 {
            let single = materialize(&client, &[j]);
            let alone = forward_with(&mut ws, &single, &p, Pooling::Final);
            for c in 0..5 {
                assert_eq!(
                    batched.get(j, c),
                    alone.get(0, c),
                    "sequence {j} logit {c} differs between batch and singleton"
                );
            }
        }
    }

    #[test]
    fn mean_pooling_matches_reference() {
        let dims = GruDims::new(1, 4, 2);
        let p = init_params(dims, 5);
        let client = random_client(6, &[5], 1, 2);
        let batch = materialize(&client, &[0]);
        let mut ws = Workspace::new();
        let logits = forward_with(&mut ws, &batch, &p, Pooling::Mean);

        let ex = &client.examples[0];
        let mut hidden = Vector::zeros(4);
        let mut mean = vec![0.0; 4];
        for t in 0..ex.length {
            let x = Vector::from_vec(vec![ex.features[t]]);
            hidden = gru_step(&x, &hidden, &p);
            for j in 0..4 {
                mean[j] += hidden[j];
            }
        }
        for m in mean.iter_mut() {
            *m /= ex.length as f64;
        }
        for c in 0..2 {
            let mut want = p.b_out[c];
            for j in 0..4 {
                want += p.w_out.get(c, j) * mean[j];
            }
            assert!((logits.get(0, c) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_requires_recording_forward() {
        let dims = GruDims::new(1, 3, 2);
        let p = init_params(dims, 1);
        let client = random_client(2, &[3], 1, 2);
        let batch: Batch = materialize(&client, &[0]);
        let mut ws = Workspace::new();
        let _ = forward(&mut ws, &batch, &p, Pooling::Final, false);
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            backward(&mut ws, &batch, &p, Pooling::Final)
        }));
        assert!(result.is_err());
    }
}
