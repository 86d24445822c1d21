//! Dense kernels behind the batched GRU engine.
//!
//! Row-major everywhere. When the build enables `avx512f`+`avx512dq`
//! (e.g. via `-C target-cpu=native`, see `.cargo/config.toml`) an explicit
//! SIMD path is compiled in; otherwise a portable blocked scalar path is
//! used. Both paths run loops in the same fixed order, so results are
//! deterministic for a given build.
//!
//! Shapes follow the engine convention: activation blocks are
//! (rows = sequences) x (cols = units), weight blocks are
//! (input units) x (output units).

/// C (m x n) += A (m x k) * B (k x n).
pub fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    imp::gemm_acc(c, a, b, m, k, n);
}

/// C (k x n) += A^T * B, with A (m x k) and B (m x n) both row-major.
///
/// This is the outer-product accumulation used for weight gradients:
/// C[q][j] += sum_p A[p][q] * B[p][j].
pub fn gemm_at_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), k * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    imp::gemm_at_acc(c, a, b, m, k, n);
}

/// Elementwise logistic function over a slice.
pub fn sigmoid_inplace(xs: &mut [f64]) {
    imp::sigmoid_inplace(xs);
}

/// Elementwise tanh over a slice.
pub fn tanh_inplace(xs: &mut [f64]) {
    imp::tanh_inplace(xs);
}

#[cfg(all(
    target_arch = "x86_64",
    target_feature = "avx512f",
    target_feature = "avx512dq"
))]
mod imp {
    use core::arch::x86_64::*;

    const EXP_LO: f64 = -708.0;
    const EXP_HI: f64 = 709.0;
    const EXP_MAGIC: f64 = 6_755_399_441_055_744.0;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_9e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    const INV_LN2: f64 = 1.442_695_040_888_963_387e0;

    #[inline]
    fn tail_mask(rem: usize) -> __mmask8 {
        ((1u16 << rem) - 1) as __mmask8
    }

    pub fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        // SAFETY: slice lengths are checked by the public wrappers; all
        // pointer offsets below stay within m*n / m*k / k*n.
        unsafe {
            let cp = c.as_mut_ptr();
            let ap = a.as_ptr();
            let bp = b.as_ptr();
            let mut i = 0;
            while i + 4 <= m {
                mul_rows4(cp, ap, bp, i, |row, p| *ap.add(row * k + p), k, n);
                i += 4;
            }
            while i < m {
                mul_row1(cp, bp, i, |p| *ap.add(i * k + p), k, n);
                i += 1;
            }
        }
    }

    pub fn gemm_at_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        // Same tiling as gemm_acc with the A operand read column-wise.
        // SAFETY: see gemm_acc.
        unsafe {
            let cp = c.as_mut_ptr();
            let ap = a.as_ptr();
            let bp = b.as_ptr();
            let mut q = 0;
            while q + 4 <= k {
                mul_rows4(cp, ap, bp, q, |row, p| *ap.add(p * k + row), m, n);
                q += 4;
            }
            while q < k {
                mul_row1(cp, bp, q, |p| *ap.add(p * k + q), m, n);
                q += 1;
            }
        }
    }

    /// Four C rows at once: C[i..i+4][:] += sum_p coeff(i+r, p) * B[p][:].
    #[inline]
    unsafe fn mul_rows4(
        cp: *mut f64,
        _ap: *const f64,
        bp: *const f64,
        i: usize,
        coeff: impl Fn(usize, usize) -> f64,
        depth: usize,
        n: usize,
    ) {
        let r0 = cp.add(i * n);
        let r1 = cp.add((i + 1) * n);
        let r2 = cp.add((i + 2) * n);
        let r3 = cp.add((i + 3) * n);
        let mut j = 0;
        while j + 32 <= n {
            let mut acc = [
                _mm512_loadu_pd(r0.add(j)),
                _mm512_loadu_pd(r0.add(j + 8)),
                _mm512_loadu_pd(r0.add(j + 16)),
                _mm512_loadu_pd(r0.add(j + 24)),
                _mm512_loadu_pd(r1.add(j)),
                _mm512_loadu_pd(r1.add(j + 8)),
                _mm512_loadu_pd(r1.add(j + 16)),
                _mm512_loadu_pd(r1.add(j + 24)),
                _mm512_loadu_pd(r2.add(j)),
                _mm512_loadu_pd(r2.add(j + 8)),
                _mm512_loadu_pd(r2.add(j + 16)),
                _mm512_loadu_pd(r2.add(j + 24)),
                _mm512_loadu_pd(r3.add(j)),
                _mm512_loadu_pd(r3.add(j + 8)),
                _mm512_loadu_pd(r3.add(j + 16)),
                _mm512_loadu_pd(r3.add(j + 24)),
            ];
            for p in 0..depth {
                let b0 = _mm512_loadu_pd(bp.add(p * n + j));
                let b1 = _mm512_loadu_pd(bp.add(p * n + j + 8));
                let b2 = _mm512_loadu_pd(bp.add(p * n + j + 16));
                let b3 = _mm512_loadu_pd(bp.add(p * n + j + 24));
                let x0 = _mm512_set1_pd(coeff(i, p));
                acc[0] = _mm512_fmadd_pd(x0, b0, acc[0]);
                acc[1] = _mm512_fmadd_pd(x0, b1, acc[1]);
                acc[2] = _mm512_fmadd_pd(x0, b2, acc[2]);
                acc[3] = _mm512_fmadd_pd(x0, b3, acc[3]);
                let x1 = _mm512_set1_pd(coeff(i + 1, p));
                acc[4] = _mm512_fmadd_pd(x1, b0, acc[4]);
                acc[5] = _mm512_fmadd_pd(x1, b1, acc[5]);
                acc[6] = _mm512_fmadd_pd(x1, b2, acc[6]);
                acc[7] = _mm512_fmadd_pd(x1, b3, acc[7]);
                let x2 = _mm512_set1_pd(coeff(i + 2, p));
                acc[8] = _mm512_fmadd_pd(x2, b0, acc[8]);
                acc[9] = _mm512_fmadd_pd(x2, b1, acc[9]);
                acc[10] = _mm512_fmadd_pd(x2, b2, acc[10]);
                acc[11] = _mm512_fmadd_pd(x2, b3, acc[11]);
                let x3 = _mm512_set1_pd(coeff(i + 3, p));
                acc[12] = _mm512_fmadd_pd(x3, b0, acc[12]);
                acc[13] = _mm512_fmadd_pd(x3, b1, acc[13]);
                acc[14] = _mm512_fmadd_pd(x3, b2, acc[14]);
                acc[15] = _mm512_fmadd_pd(x3, b3, acc[15]);
            }
            _mm512_storeu_pd(r0.add(j), acc[0]);
            _mm512_storeu_pd(r0.add(j + 8), acc[1]);
            _mm512_storeu_pd(r0.add(j + 16), acc[2]);
            _mm512_storeu_pd(r0.add(j + 24), acc[3]);
            _mm512_storeu_pd(r1.add(j), acc[4]);
            _mm512_storeu_pd(r1.add(j + 8), acc[5]);
            _mm512_storeu_pd(r1.add(j + 16), acc[6]);
            _mm512_storeu_pd(r1.add(j + 24), acc[7]);
            _mm512_storeu_pd(r2.add(j), acc[8]);
            _mm512_storeu_pd(r2.add(j + 8), acc[9]);
            _mm512_storeu_pd(r2.add(j + 16), acc[10]);
            _mm512_storeu_pd(r2.add(j + 24), acc[11]);
            _mm512_storeu_pd(r3.add(j), acc[12]);
            _mm512_storeu_pd(r3.add(j + 8), acc[13]);
            _mm512_storeu_pd(r3.add(j + 16), acc[14]);
            _mm512_storeu_pd(r3.add(j + 24), acc[15]);
            j += 32;
        }
        while j + 8 <= n {
            let mut a0 = _mm512_loadu_pd(r0.add(j));
            let mut a1 = _mm512_loadu_pd(r1.add(j));
            let mut a2 = _mm512_loadu_pd(r2.add(j));
            let mut a3 = _mm512_loadu_pd(r3.add(j));
            for p in 0..depth {
                let b0 = _mm512_loadu_pd(bp.add(p * n + j));
                a0 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i, p)), b0, a0);
                a1 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i + 1, p)), b0, a1);
                a2 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i + 2, p)), b0, a2);
                a3 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i + 3, p)), b0, a3);
            }
            _mm512_storeu_pd(r0.add(j), a0);
            _mm512_storeu_pd(r1.add(j), a1);
            _mm512_storeu_pd(r2.add(j), a2);
            _mm512_storeu_pd(r3.add(j), a3);
            j += 8;
        }
        if j < n {
            let mk = tail_mask(n - j);
            let mut a0 = _mm512_maskz_loadu_pd(mk, r0.add(j));
            let mut a1 = _mm512_maskz_loadu_pd(mk, r1.add(j));
            let mut a2 = _mm512_maskz_loadu_pd(mk, r2.add(j));
            let mut a3 = _mm512_maskz_loadu_pd(mk, r3.add(j));
            for p in 0..depth {
                let b0 = _mm512_maskz_loadu_pd(mk, bp.add(p * n + j));
                a0 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i, p)), b0, a0);
                a1 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i + 1, p)), b0, a1);
                a2 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i + 2, p)), b0, a2);
                a3 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(i + 3, p)), b0, a3);
            }
            _mm512_mask_storeu_pd(r0.add(j), mk, a0);
            _mm512_mask_storeu_pd(r1.add(j), mk, a1);
            _mm512_mask_storeu_pd(r2.add(j), mk, a2);
            _mm512_mask_storeu_pd(r3.add(j), mk, a3);
        }
    }

    /// Single C row: C[i][:] += sum_p coeff(p) * B[p][:].
    #[inline]
    unsafe fn mul_row1(
        cp: *mut f64,
        bp: *const f64,
        i: usize,
        coeff: impl Fn(usize) -> f64,
        depth: usize,
        n: usize,
    ) {
        let r0 = cp.add(i * n);
        let mut j = 0;
        while j + 8 <= n {
            let mut a0 = _mm512_loadu_pd(r0.add(j));
            for p in 0..depth {
                let b0 = _mm512_loadu_pd(bp.add(p * n + j));
                a0 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(p)), b0, a0);
            }
            _mm512_storeu_pd(r0.add(j), a0);
            j += 8;
        }
        if j < n {
            let mk = tail_mask(n - j);
            let mut a0 = _mm512_maskz_loadu_pd(mk, r0.add(j));
            for p in 0..depth {
                let b0 = _mm512_maskz_loadu_pd(mk, bp.add(p * n + j));
                a0 = _mm512_fmadd_pd(_mm512_set1_pd(coeff(p)), b0, a0);
            }
            _mm512_mask_storeu_pd(r0.add(j), mk, a0);
        }
    }

    /// Vector exp, same reduction and polynomial as `numerics::exp`.
    #[inline]
    unsafe fn exp_v(x: __m512d) -> __m512d {
        let x = _mm512_max_pd(x, _mm512_set1_pd(EXP_LO));
        let x = _mm512_min_pd(x, _mm512_set1_pd(EXP_HI));
        let magic = _mm512_set1_pd(EXP_MAGIC);
        let shifted = _mm512_add_pd(_mm512_mul_pd(x, _mm512_set1_pd(INV_LN2)), magic);
        let n = _mm512_sub_pd(shifted, magic);
        let r = _mm512_sub_pd(
            _mm512_sub_pd(x, _mm512_mul_pd(n, _mm512_set1_pd(LN2_HI))),
            _mm512_mul_pd(n, _mm512_set1_pd(LN2_LO)),
        );
        const COEFFS: [f64; 13] = [
            1.0 / 6227020800.0,
            1.0 / 479001600.0,
            1.0 / 39916800.0,
            1.0 / 3628800.0,
            1.0 / 362880.0,
            1.0 / 40320.0,
            1.0 / 5040.0,
            1.0 / 720.0,
            1.0 / 120.0,
            1.0 / 24.0,
            1.0 / 6.0,
            0.5,
            1.0,
        ];
        let mut p = _mm512_set1_pd(COEFFS[0]);
        for &c in &COEFFS[1..] {
            p = _mm512_fmadd_pd(p, r, _mm512_set1_pd(c));
        }
        p = _mm512_fmadd_pd(p, r, _mm512_set1_pd(1.0));
        let ni = _mm512_cvtpd_epi64(n);
        let bits = _mm512_slli_epi64::<52>(_mm512_add_epi64(ni, _mm512_set1_epi64(1023)));
        _mm512_mul_pd(p, _mm512_castsi512_pd(bits))
    }

    #[inline]
    unsafe fn sigmoid_v(x: __m512d) -> __m512d {
        let one = _mm512_set1_pd(1.0);
        let e = exp_v(_mm512_sub_pd(_mm512_setzero_pd(), x));
        _mm512_div_pd(one, _mm512_add_pd(one, e))
    }

    #[inline]
    unsafe fn tanh_v(x: __m512d) -> __m512d {
        let one = _mm512_set1_pd(1.0);
        let sign_bit = _mm512_set1_pd(-0.0);
        let ax = _mm512_andnot_pd(sign_bit, x);
        let t = exp_v(_mm512_mul_pd(ax, _mm512_set1_pd(-2.0)));
        let m = _mm512_div_pd(_mm512_sub_pd(one, t), _mm512_add_pd(one, t));
        // copy the sign of x back on
        _mm512_or_pd(m, _mm512_and_pd(sign_bit, x))
    }

    pub fn sigmoid_inplace(xs: &mut [f64]) {
        // SAFETY: chunked within the slice; tails masked.
        unsafe {
            let p = xs.as_mut_ptr();
            let n = xs.len();
            let mut j = 0;
            while j + 8 <= n {
                _mm512_storeu_pd(p.add(j), sigmoid_v(_mm512_loadu_pd(p.add(j))));
                j += 8;
            }
            if j < n {
                let mk = tail_mask(n - j);
                let v = sigmoid_v(_mm512_maskz_loadu_pd(mk, p.add(j)));
                _mm512_mask_storeu_pd(p.add(j), mk, v);
            }
        }
    }

    pub fn tanh_inplace(xs: &mut [f64]) {
        // SAFETY: chunked within the slice; tails masked.
        unsafe {
            let p = xs.as_mut_ptr();
            let n = xs.len();
            let mut j = 0;
            while j + 8 <= n {
                _mm512_storeu_pd(p.add(j), tanh_v(_mm512_loadu_pd(p.add(j))));
                j += 8;
            }
            if j < n {
                let mk = tail_mask(n - j);
                let v = tanh_v(_mm512_maskz_loadu_pd(mk, p.add(j)));
                _mm512_mask_storeu_pd(p.add(j), mk, v);
            }
        }
    }
}

#[cfg(not(all(
    target_arch = "x86_64",
    target_feature = "avx512f",
    target_feature = "avx512dq"
)))]
mod imp {
    use crate::numerics::{sigmoid_scalar, tanh_scalar};

    pub fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        let mut i = 0;
        while i + 4 <= m {
            let (c0, rest) = c[i * n..].split_at_mut(n);
            let (c1, rest) = rest.split_at_mut(n);
            let (c2, rest) = rest.split_at_mut(n);
            let (c3, _) = rest.split_at_mut(n);
            for p in 0..k {
                let x0 = a[i * k + p];
                let x1 = a[(i + 1) * k + p];
                let x2 = a[(i + 2) * k + p];
                let x3 = a[(i + 3) * k + p];
                let brow = &b[p * n..p * n + n];
                for j in 0..n {
                    let bv = brow[j];
                    c0[j] += x0 * bv;
                    c1[j] += x1 * bv;
                    c2[j] += x2 * bv;
                    c3[j] += x3 * bv;
                }
            }
            i += 4;
        }
        while i < m {
            let crow = &mut c[i * n..(i + 1) * n];
            for p in 0..k {
                let x = a[i * k + p];
                let brow = &b[p * n..p * n + n];
                for j in 0..n {
                    crow[j] += x * brow[j];
                }
            }
            i += 1;
        }
    }

    pub fn gemm_at_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        let mut q = 0;
        while q + 4 <= k {
            let (c0, rest) = c[q * n..].split_at_mut(n);
            let (c1, rest) = rest.split_at_mut(n);
            let (c2, rest) = rest.split_at_mut(n);
            let (c3, _) = rest.split_at_mut(n);
            for p in 0..m {
                let x0 = a[p * k + q];
                let x1 = a[p * k + q + 1];
                let x2 = a[p * k + q + 2];
                let x3 = a[p * k + q + 3];
                let brow = &b[p * n..p * n + n];
                for j in 0..n {
                    let bv = brow[j];
                    c0[j] += x0 * bv;
                    c1[j] += x1 * bv;
                    c2[j] += x2 * bv;
                    c3[j] += x3 * bv;
                }
            }
            q += 4;
        }
        while q < k {
            let crow = &mut c[q * n..(q + 1) * n];
            for p in 0..m {
                let x = a[p * k + q];
                let brow = &b[p * n..p * n + n];
                for j in 0..n {
                    crow[j] += x * brow[j];
                }
            }
            q += 1;
        }
    }

    pub fn sigmoid_inplace(xs: &mut [f64]) {
        for x in xs.iter_mut() {
            *x = sigmoid_scalar(*x);
        }
    }

    pub fn tanh_inplace(xs: &mut [f64]) {
        for x in xs.iter_mut() {
            *x = tanh_scalar(*x);
        }
    }
}
