//! Fixtures shared by the criterion benchmarks.

use tracedist::{seed, BitString};

/// A random string of length `n` and a copy with one bit flipped near the
/// end, so the pair differs late.
pub fn late_diff_pair(n: usize, rng_seed: u64) -> (BitString, BitString) {
    let mut rng = seed::rng(rng_seed);
    let x = BitString::random(n, &mut rng);
    let mut bits = x.bits().to_vec();
    let i = n - 1 - n / 10;
    bits[i] ^= 1;
    (x, BitString::new(bits).expect("binary"))
}
