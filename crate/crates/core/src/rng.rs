//! Keyed counter-based generator used wherever a permutation or split must
//! be reproducible across implementations. The algorithm is normative and
//! documented in `docs/prng.md`; changing it changes every task order.
//!
//! * `mix64`: the SplitMix64 finalizer.
//! * Stream key: `mix64(seed ^ mix64(stream))`.
//! * Output `i` (0-based): `mix64(key + (i + 1) * 0x9E3779B97F4A7C15)`, wrapping.
//! * `below(n)`: draw `x` until `x >= (2^64 - n) mod n`, return `x mod n`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Source of raw 64-bit words.
pub trait Rng64 {
    fn next_u64(&mut self) -> u64;

    /// Uniform integer in `0..n`. `n` must be non-zero.
    fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone)]
pub struct KeyedRng {
    key: u64,
    counter: u64,
}

impl KeyedRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: mix64(seed ^ mix64(stream)),
            counter: 0,
        }
    }

    /// Stream keyed by a string identifier (e.g. an evaluator id).
    pub fn for_label(seed: u64, label: &str) -> Self {
        Self::new(seed, fnv1a(label))
    }
}

impl Rng64 for KeyedRng {
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }
}

/// Fisher–Yates, from the last index down to 1.
pub fn shuffle<T, R: Rng64>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
