//! Adam, applied locally by each client.

use alloc::vec;
use alloc::vec::Vec;

/// Adam moments and hyperparameters for one flat parameter vector.
///
/// `b1_pow`/`b2_pow` carry the running beta powers used for bias
/// correction, so stepping needs no `powi`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    b1_pow: f64,
    b2_pow: f64,
}

/// Fresh state with zero moments.
pub fn adam_init(param_len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> AdamState {
    assert!(param_len >= 1, "param_len must be >= 1");
    assert!(lr > 0.0, "learning rate must be positive, got {lr}");
    assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2), "betas must be in [0,1)");
    AdamState {
        m: vec![0.0; param_len],
        v: vec![0.0; param_len],
        t: 0,
        lr,
        beta1,
        beta2,
        eps,
        b1_pow: 1.0,
        b2_pow: 1.0,
    }
}

/// One Adam update with bias correction:
/// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
/// theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
pub fn adam_step(params: &mut [f64], grads: &[f64], s: &mut AdamState) {
    assert_eq!(
        params.len(),
        grads.len(),
        "adam_step shape mismatch: {} params vs {} grads",
        params.len(),
        grads.len()
    );
    assert_eq!(
        params.len(),
        s.m.len(),
        "adam_step shape mismatch: {} params vs state of {}",
        params.len(),
        s.m.len()
    );
    s.t += 1;
    s.b1_pow *= s.beta1;
    s.b2_pow *= s.beta2;
    let c1 = 1.0 / (1.0 - s.b1_pow);
    let c2 = 1.0 / (1.0 - s.b2_pow);
    for i in 0..params.len() {
        let g = grads[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        let m_hat = s.m[i] * c1;
        let v_hat = s.v[i] * c2;
        params[i] -= s.lr * m_hat / (libm::sqrt(v_hat) + s.eps);
    }
}
