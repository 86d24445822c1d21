//! GRU sequence classifier: parameters, masked batch forward pass,
//! hand-derived backpropagation through time, and flat parameter views.
//!
//! Gate convention (fixed; the literature has both signs):
//!
//! ```text
//! z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//! r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//! c_t = tanh  (W_h x_t + U_h (r_t . h_{t-1}) + b_h)
//! h_t = (1 - z_t) . h_{t-1} + z_t . c_t
//! ```
//!
//! The classifier reads each sequence's hidden state at its true final
//! step (`Pooling::Final`, the default) or the mask-aware mean over its
//! steps (`Pooling::Mean`); logits are `W_out h + b_out`. Padded steps
//! never alter any sequence's hidden state.
//!
//! Flat layout of [`ParamVector`], in order, each block row-major:
//! `W_z, W_r, W_h (H x d), U_z, U_r, U_h (H x H), b_z, b_r, b_h (H),
//! W_out (k x H), b_out (k)`; total length `H(3d + 3H + 3) + k(H + 1)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::batching::Batch;
use crate::error::Error;
use crate::numerics::{matvec, sigmoid, tanh, Matrix, Vector};
use crate::rng::Rng;
use crate::Result;

mod engine;

pub use engine::Workspace;

/// Model dimensions: feature width `d`, hidden size `H`, class count `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GruDims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl GruDims {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Self {
        assert!(input >= 1 && hidden >= 1 && classes >= 1, "dims must be >= 1");
        GruDims { input, hidden, classes }
    }

    /// Flat parameter count for these dimensions.
    pub fn param_len(&self) -> usize {
        let (d, h, k) = (self.input, self.hidden, self.classes);
        h * (3 * d + 3 * h + 3) + k * (h + 1)
    }

    /// Recover `k` from a flat length given `d` and `H`; errors when the
    /// length does not correspond to any class count.
    pub fn infer(param_len: usize, input: usize, hidden: usize) -> Result<Self> {
        let (d, h) = (input, hidden);
        let base = h * (3 * d + 3 * h + 3);
        if param_len <= base || (param_len - base) % (h + 1) != 0 {
            return Err(Error::ParamLengthMismatch { left: param_len, right: base });
        }
        Ok(GruDims::new(d, h, (param_len - base) / (h + 1)))
    }
}

/// All trainable weights of the classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub dims: GruDims,
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Vector,
    pub b_r: Vector,
    pub b_h: Vector,
    pub w_out: Matrix,
    pub b_out: Vector,
}

/// Gradients, shape-matched to [`GruParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub dims: GruDims,
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Vector,
    pub b_r: Vector,
    pub b_h: Vector,
    pub w_out: Matrix,
    pub b_out: Vector,
}

impl Gradients {
    pub fn zeros(dims: GruDims) -> Self {
        let (d, h, k) = (dims.input, dims.hidden, dims.classes);
        Gradients {
            dims,
            w_z: Matrix::zeros(h, d),
            w_r: Matrix::zeros(h, d),
            w_h: Matrix::zeros(h, d),
            u_z: Matrix::zeros(h, h),
            u_r: Matrix::zeros(h, h),
            u_h: Matrix::zeros(h, h),
            b_z: Vector::zeros(h),
            b_r: Vector::zeros(h),
            b_h: Vector::zeros(h),
            w_out: Matrix::zeros(k, h),
            b_out: Vector::zeros(k),
        }
    }

    /// Flatten into the documented layout (same order as parameters).
    pub fn to_param_vector(&self) -> ParamVector {
        flatten_blocks(
            self.dims,
            [&self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h],
            [&self.b_z, &self.b_r, &self.b_h],
            &self.w_out,
            &self.b_out,
        )
    }
}

/// Flat view of all parameters; the object FedAvg averages and measures
/// distances on. Layout documented at the module level.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    data: Vec<f64>,
}

impl ParamVector {
    pub fn from_vec(data: Vec<f64>) -> Self {
        ParamVector { data }
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.data.iter()
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Checkpoint encoding: u64 little-endian length prefix followed by
    /// each entry as a little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.data.len());
        out.extend_from_slice(&(self.data.len() as u64).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::BadParamEncoding("missing length prefix".into()));
        }
        let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        if bytes.len() != 8 + 8 * len {
            return Err(Error::BadParamEncoding(alloc::format!(
                "expected {} payload bytes, got {}",
                8 * len,
                bytes.len() - 8
            )));
        }
        let data = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ParamVector { data })
    }
}

/// Initialize parameters: weights uniform in (-1/sqrt(H), 1/sqrt(H)),
/// biases zero. Weight blocks are filled in flat-layout order, so the
/// result is a pure function of (dims, seed).
pub fn init_params(dims: GruDims, seed: u64) -> GruParams {
    let (d, h, k) = (dims.input, dims.hidden, dims.classes);
    let bound = 1.0 / libm::sqrt(h as f64);
    let mut rng = Rng::new(seed);
    let mut fill = |rows: usize, cols: usize| {
        let data = (0..rows * cols).map(|_| rng.range_f64(-bound, bound)).collect();
        Matrix::from_vec(rows, cols, data)
    };
    let w_z = fill(h, d);
    let w_r = fill(h, d);
    let w_h = fill(h, d);
    let u_z = fill(h, h);
    let u_r = fill(h, h);
    let u_h = fill(h, h);
    let w_out = fill(k, h);
    GruParams {
        dims,
        w_z,
        w_r,
        w_h,
        u_z,
        u_r,
        u_h,
        b_z: Vector::zeros(h),
        b_r: Vector::zeros(h),
        b_h: Vector::zeros(h),
        w_out,
        b_out: Vector::zeros(k),
    }
}

/// One GRU step on a single sequence element (reference path; the batched
/// engine is checked against loops of this in tests).
pub fn gru_step(x: &Vector, h_prev: &Vector, p: &GruParams) -> Vector {
    assert_eq!(
        x.len(),
        p.dims.input,
        "gru_step input length {} does not match d={}",
        x.len(),
        p.dims.input
    );
    assert_eq!(
        h_prev.len(),
        p.dims.hidden,
        "gru_step hidden length {} does not match H={}",
        h_prev.len(),
        p.dims.hidden
    );
    let h = p.dims.hidden;
    let add3 = |a: &Vector, b: &Vector, c: &Vector| {
        Vector::from_vec((0..a.len()).map(|i| a[i] + b[i] + c[i]).collect())
    };
    let z = sigmoid(&add3(&matvec(&p.w_z, x), &matvec(&p.u_z, h_prev), &p.b_z));
    let r = sigmoid(&add3(&matvec(&p.w_r, x), &matvec(&p.u_r, h_prev), &p.b_r));
    let rh = Vector::from_vec((0..h).map(|i| r[i] * h_prev[i]).collect());
    let c = tanh(&add3(&matvec(&p.w_h, x), &matvec(&p.u_h, &rh), &p.b_h));
    Vector::from_vec((0..h).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * c[i]).collect())
}

/// How the classifier condenses a sequence's hidden states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Hidden state at the sequence's true final step.
    #[default]
    Final,
    /// Mean of the hidden states over the sequence's true steps.
    Mean,
}

/// Forward pass over a masked batch; returns per-sequence logits
/// (`batch_size x k`, original batch order), reading each sequence's
/// hidden state at its own final step. Padding never enters any hidden
/// state. The cached activations for backpropagation live in the
/// workspace; this convenience wrapper discards them.
pub fn forward(batch: &Batch, p: &GruParams) -> Matrix {
    let mut ws = Workspace::new();
    forward_with(&mut ws, batch, p, Pooling::Final)
}

/// Forward pass reusing a caller-owned workspace, which afterwards holds
/// the cached activations consumed by [`loss_and_grads_with`].
pub fn forward_with(ws: &mut Workspace, batch: &Batch, p: &GruParams, pooling: Pooling) -> Matrix {
    engine::forward(ws, batch, p, pooling, true)
}

/// Mean cross-entropy loss over the batch plus gradients from full
/// backpropagation through time (no truncation), averaged over the batch.
pub fn loss_and_grads(batch: &Batch, p: &GruParams) -> (f64, Gradients) {
    let mut ws = Workspace::new();
    loss_and_grads_with(&mut ws, batch, p, Pooling::Final)
}

/// As [`loss_and_grads`], reusing a caller-owned workspace.
pub fn loss_and_grads_with(
    ws: &mut Workspace,
    batch: &Batch,
    p: &GruParams,
    pooling: Pooling,
) -> (f64, Gradients) {
    let _ = engine::forward(ws, batch, p, pooling, true);
    engine::backward(ws, batch, p, pooling)
}

/// Per-sequence logits without keeping activation caches; evaluation path.
pub fn logits_only(ws: &mut Workspace, batch: &Batch, p: &GruParams, pooling: Pooling) -> Matrix {
    engine::forward(ws, batch, p, pooling, false)
}

fn flatten_blocks(
    dims: GruDims,
    mats: [&Matrix; 6],
    biases: [&Vector; 3],
    w_out: &Matrix,
    b_out: &Vector,
) -> ParamVector {
    let mut data = Vec::with_capacity(dims.param_len());
    for m in mats {
        data.extend_from_slice(m.as_slice());
    }
    for b in biases {
        data.extend_from_slice(b.as_slice());
    }
    data.extend_from_slice(w_out.as_slice());
    data.extend_from_slice(b_out.as_slice());
    debug_assert_eq!(data.len(), dims.param_len());
    ParamVector { data }
}

/// Flatten parameters into the documented layout.
pub fn flatten(p: &GruParams) -> ParamVector {
    flatten_blocks(
        p.dims,
        [&p.w_z, &p.w_r, &p.w_h, &p.u_z, &p.u_r, &p.u_h],
        [&p.b_z, &p.b_r, &p.b_h],
        &p.w_out,
        &p.b_out,
    )
}

/// Rebuild parameters from a flat vector; the inverse of [`flatten`].
pub fn unflatten(v: &ParamVector, dims: GruDims) -> GruParams {
    assert_eq!(
        v.len(),
        dims.param_len(),
        "param vector length {} does not match dims (d={}, H={}, k={}) requiring {}",
        v.len(),
        dims.input,
        dims.hidden,
        dims.classes,
        dims.param_len()
    );
    let (d, h, k) = (dims.input, dims.hidden, dims.classes);
    let mut at = 0;
    let mut take_mat = |rows: usize, cols: usize| {
        let m = Matrix::from_vec(rows, cols, v.as_slice()[at..at + rows * cols].to_vec());
        at += rows * cols;
        m
    };
    let w_z = take_mat(h, d);
    let w_r = take_mat(h, d);
    let w_h = take_mat(h, d);
    let u_z = take_mat(h, h);
    let u_r = take_mat(h, h);
    let u_h = take_mat(h, h);
    let mut take_vec = |len: usize| {
        let out = Vector::from_vec(v.as_slice()[at..at + len].to_vec());
        at += len;
        out
    };
    let b_z = take_vec(h);
    let b_r = take_vec(h);
    let b_h = take_vec(h);
    let w_out = {
        let m = Matrix::from_vec(k, h, v.as_slice()[at..at + k * h].to_vec());
        at += k * h;
        m
    };
    let b_out = Vector::from_vec(v.as_slice()[at..at + k].to_vec());
    GruParams { dims, w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h, w_out, b_out }
}
