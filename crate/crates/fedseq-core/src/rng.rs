//! Deterministic pseudo-random streams.
//!
//! All randomness in a run flows from a single root seed. Independent
//! streams are derived by hashing the root together with fixed tags
//! through a SplitMix64 step, so dataset construction, model
//! initialization and per-(round, client) training shuffles never share a
//! stream and never depend on scheduling order. Client workers running in
//! parallel therefore produce the same numbers as a serial run.
//!
//! Stream map used across the crate:
//!
//! | stream                      | derivation                                  |
//! |-----------------------------|---------------------------------------------|
//! | dataset construction        | `derive_seed(root, &[STREAM_DATASET])`      |
//! | model initialization        | `derive_seed(root, &[STREAM_INIT])`         |
//! | client training, round r    | `derive_seed(root, &[STREAM_TRAIN, r, c])`  |
//!
//! The generator itself is xoshiro256**, seeded from a SplitMix64 chain.

/// Tag for the dataset-construction stream.
pub const STREAM_DATASET: u64 = 0x01;
/// Tag for the model-initialization stream.
pub const STREAM_INIT: u64 = 0x02;
/// Tag for per-(round, client) local-training streams.
pub const STREAM_TRAIN: u64 = 0x03;

/// One SplitMix64 step: increment by the golden ratio and finalize.
#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `root` and a list of stream tags.
///
/// Each tag is spread by an odd multiplier before being absorbed, so small
/// consecutive tags (round/client indices) land in unrelated states.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut s = root;
    for &t in tags {
        s = splitmix64(s ^ t.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    s
}

/// xoshiro256** generator; plenty for simulation sampling, not for crypto.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut x = seed;
        let mut s = [0u64; 4];
        for slot in s.iter_mut() {
            x = splitmix64(x);
            *slot = x;
        }
        // all-zero state would be a fixed point
        if s == [0, 0, 0, 0] {
            s[0] = 0x9E37_79B9_7F4A_7C15;
        }
        Rng { s }
    }

    /// Generator for a derived stream; see the module docs for the map.
    pub fn from_stream(root: u64, tags: &[u64]) -> Self {
        Rng::new(derive_seed(root, tags))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1]
            .wrapping_mul(5)
            .rotate_left(7)
            .wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    /// Uniform integer in [0, n); unbiased via rejection.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}
