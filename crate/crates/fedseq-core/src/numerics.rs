//! Minimal dense numeric kernels: matrices, vectors, activations, losses.
//!
//! Double precision throughout, row-major storage, no sparsity; the
//! problem sizes here are tiny. Operations are pure, and shape violations
//! panic with both shapes in the message.

use alloc::vec;
use alloc::vec::Vec;

/// Dense row-major f64 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wrap an existing row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Transposed copy.
    pub fn transposed(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }
}

/// Dense f64 vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
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
}

impl core::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl core::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

/// Standard matrix-vector product.
pub fn matvec(m: &Matrix, v: &Vector) -> Vector {
    assert_eq!(
        m.cols,
        v.len(),
        "matvec shape mismatch: {}x{} times vector of length {}",
        m.rows,
        m.cols,
        v.len()
    );
    let mut out = Vector::zeros(m.rows);
    for i in 0..m.rows {
        let row = m.row(i);
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(v.as_slice()) {
            acc += a * b;
        }
        out.data[i] = acc;
    }
    out
}

// exp() below saturates rather than overflowing/underflowing; these bounds
// keep 2^n representable as a normal f64.
const EXP_LO: f64 = -708.0;
const EXP_HI: f64 = 709.0;
const EXP_MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52, rounds-to-int trick
const LN2_HI: f64 = 6.931_471_803_691_238_164_9e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
const INV_LN2: f64 = 1.442_695_040_888_963_387e0;

/// exp(x) with ~1 ulp accuracy on the clamped range, saturating outside
/// [-708, 709]. Branch-free so that elementwise loops vectorize; this is
/// the single exp used by every activation in the crate.
#[inline]
pub fn exp(x: f64) -> f64 {
    let x = if x < EXP_LO { EXP_LO } else { x };
    let x = if x > EXP_HI { EXP_HI } else { x };
    // round x/ln2 to the nearest integer via the shifter constant
    let shifted = x * INV_LN2 + EXP_MAGIC;
    let n = shifted - EXP_MAGIC;
    // Cody-Waite reduction: r = x - n*ln2, |r| <= ln2/2
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // degree-13 Taylor polynomial of exp on [-ln2/2, ln2/2]
    let p = 1.0
        + r * (1.0
            + r * (0.5
                + r * (1.0 / 6.0
                    + r * (1.0 / 24.0
                        + r * (1.0 / 120.0
                            + r * (1.0 / 720.0
                                + r * (1.0 / 5040.0
                                    + r * (1.0 / 40320.0
                                        + r * (1.0 / 362880.0
                                            + r * (1.0 / 3628800.0
                                                + r * (1.0 / 39916800.0
                                                    + r * (1.0 / 479001600.0
                                                        + r * (1.0 / 6227020800.0)))))))))))));
    let scale = f64::from_bits(((n as i64 + 1023) as u64) << 52);
    p * scale
}

/// Logistic function, output in (0, 1).
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

/// Hyperbolic tangent, output in (-1, 1). Computed from exp(-2|x|) so it
/// never overflows and is exactly zero at zero.
#[inline]
pub fn tanh_scalar(x: f64) -> f64 {
    let t = exp(-2.0 * if x < 0.0 { -x } else { x });
    let m = (1.0 - t) / (1.0 + t);
    if x < 0.0 {
        -m
    } else {
        m
    }
}

/// Elementwise sigmoid.
pub fn sigmoid(v: &Vector) -> Vector {
    Vector::from_vec(v.as_slice().iter().map(|&x| sigmoid_scalar(x)).collect())
}

/// Elementwise tanh.
pub fn tanh(v: &Vector) -> Vector {
    Vector::from_vec(v.as_slice().iter().map(|&x| tanh_scalar(x)).collect())
}

/// Softmax with an internal max shift, so adding a constant to every logit
/// does not change the result and large logits cannot overflow.
pub fn softmax(logits: &Vector) -> Vector {
    assert!(!logits.is_empty(), "softmax of an empty vector");
    let max = logits
        .as_slice()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &x| if x > m { x } else { m });
    let mut out: Vec<f64> = logits.as_slice().iter().map(|&x| exp(x - max)).collect();
    let sum: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= sum;
    }
    Vector::from_vec(out)
}

/// Floor applied to probabilities before the log, keeping the loss finite
/// on confident wrong predictions.
pub const PROB_FLOOR: f64 = 1e-12;

/// Negative log-likelihood of `label` under `probs`.
pub fn cross_entropy(probs: &Vector, label: usize) -> f64 {
    assert!(
        label < probs.len(),
        "cross_entropy label {} out of range for {} classes",
        label,
        probs.len()
    );
    let p = probs[label].max(PROB_FLOOR);
    -libm::log(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matvec_identity() {
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(matvec(&Matrix::identity(3), &v), v);
    }

    #[test]
    fn matvec_zeros_annihilates() {
        let v = Vector::from_vec(vec![5.0, -1.0, 2.5]);
        let out = matvec(&Matrix::zeros(2, 3), &v);
        assert_eq!(out.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn matvec_hand_case() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let out = matvec(&m, &Vector::from_vec(vec![1.0, 1.0]));
        assert_eq!(out.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    #[should_panic(expected = "matvec shape mismatch: 2x3")]
    fn matvec_shape_mismatch_panics() {
        matvec(&Matrix::zeros(2, 3), &Vector::zeros(2));
    }

    #[test]
    fn exp_matches_std() {
        let mut x = -700.0;
        let mut max_rel: f64 = 0.0;
        while x < 700.0 {
            let mine = exp(x);
            let theirs = x.exp();
            if theirs > 0.0 && theirs.is_finite() {
                max_rel = max_rel.max(((mine - theirs) / theirs).abs());
            }
            x += 0.0371;
        }
        assert!(max_rel < 1e-14, "exp max rel err {max_rel:e}");
        assert_eq!(exp(0.0), 1.0);
    }

    #[test]
    fn sigmoid_fixed_points() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        let s = sigmoid_scalar(-1000.0);
        assert!(s.is_finite() && s >= 0.0 && s < 1e-300);
        let s = sigmoid_scalar(1000.0);
        assert!(s.is_finite() && s <= 1.0 && s > 1.0 - 1e-12);
    }

    #[test]
    fn tanh_fixed_points() {
        assert_eq!(tanh_scalar(0.0), 0.0);
        assert!((tanh_scalar(1.0) - 1.0f64.tanh()).abs() < 1e-14);
        assert!(tanh_scalar(500.0) <= 1.0 && tanh_scalar(500.0) > 1.0 - 1e-15);
        assert!(tanh_scalar(-500.0) >= -1.0);
    }

    #[test]
    fn softmax_symmetry_and_shift() {
        let s = softmax(&Vector::from_vec(vec![0.0, 0.0, 0.0]));
        for &p in s.as_slice() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        // [c, c + ln 2] -> [1/3, 2/3]
        for c in [-7.25, 0.0, 3.5, 1e6] {
            let s = softmax(&Vector::from_vec(vec![c, c + core::f64::consts::LN_2]));
            assert!((s[0] - 1.0 / 3.0).abs() < 1e-14, "c={c}");
            assert!((s[1] - 2.0 / 3.0).abs() < 1e-14, "c={c}");
        }
    }

    #[test]
    fn softmax_extreme_logits_stay_finite() {
        let s = softmax(&Vector::from_vec(vec![1000.0, 0.0]));
        assert!(s.as_slice().iter().all(|p| p.is_finite()));
        assert!((s[0] - 1.0).abs() < 1e-12);
        assert!(s[1] < 1e-300);
    }

    #[test]
    #[should_panic(expected = "softmax of an empty vector")]
    fn softmax_empty_panics() {
        softmax(&Vector::zeros(0));
    }

    #[test]
    fn cross_entropy_cases() {
        assert_eq!(cross_entropy(&Vector::from_vec(vec![1.0, 0.0]), 0), 0.0);
        let ce = cross_entropy(&Vector::from_vec(vec![0.5, 0.5]), 1);
        assert!((ce - core::f64::consts::LN_2).abs() < 1e-15);
        // clamped at the floor, stays finite
        let ce = cross_entropy(&Vector::from_vec(vec![1e-20, 1.0 - 1e-20]), 0);
        assert_eq!(ce, -libm::log(PROB_FLOOR));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn cross_entropy_bad_label_panics() {
        cross_entropy(&Vector::from_vec(vec![0.5, 0.5]), 2);
    }

    #[test]
    fn softmax_shift_exact_for_exact_sums() {
        // inputs where v + c is exact in f64: the internal max shift then
        // cancels c exactly and results are bitwise equal
        let v = [0.125, -2.5, 3.75, 1.0];
        let base = softmax(&Vector::from_vec(v.to_vec()));
        for c in [2.0f64, -16.0, 1024.0] {
            let shifted = softmax(&Vector::from_vec(v.iter().map(|&x| x + c).collect()));
            assert_eq!(base.as_slice(), shifted.as_slice(), "c={c}");
        }
    }

    proptest! {
        #[test]
        fn sigmoid_pair_sums_to_one(x in -60.0f64..60.0) {
            let s = sigmoid_scalar(x) + sigmoid_scalar(-x);
            prop_assert!((s - 1.0).abs() < 1e-15);
        }

        #[test]
        fn softmax_sums_to_one(v in proptest::collection::vec(-30.0f64..30.0, 1..12)) {
            let s = softmax(&Vector::from_vec(v));
            let sum: f64 = s.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.as_slice().iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn softmax_shift_invariance(
            v in proptest::collection::vec(-20.0f64..20.0, 2..8),
            c in -100.0f64..100.0,
        ) {
            let a = softmax(&Vector::from_vec(v.clone()));
            let b = softmax(&Vector::from_vec(v.iter().map(|&x| x + c).collect()));
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn matvec_distributes_over_addition(
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::Rng::new(seed);
            let (r, c) = (1 + (seed % 7) as usize, 1 + (seed % 5) as usize);
            let m = Matrix::from_vec(r, c, (0..r * c).map(|_| rng.range_f64(-2.0, 2.0)).collect());
            let u = Vector::from_vec((0..c).map(|_| rng.range_f64(-2.0, 2.0)).collect());
            let v = Vector::from_vec((0..c).map(|_| rng.range_f64(-2.0, 2.0)).collect());
            let sum = Vector::from_vec(
                u.as_slice().iter().zip(v.as_slice()).map(|(a, b)| a + b).collect(),
            );
            let lhs = matvec(&m, &sum);
            let mu = matvec(&m, &u);
            let mv = matvec(&m, &v);
            for i in 0..r {
                prop_assert!((lhs[i] - (mu[i] + mv[i])).abs() < 1e-12);
            }
        }
    }
}
