//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `&mut impl Rng`. Where a loop
//! needs independent per-element streams (training pairs, sweep cells), they
//! are derived from a root seed and a path of indices so results never depend
//! on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for `seed` and the index path `path`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    let mut h = splitmix(seed);
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = substream(1, &[2, 3]).random();
        let b: u64 = substream(1, &[2, 3]).random();
        let c: u64 = substream(1, &[3, 2]).random();
        let d: u64 = substream(2, &[2, 3]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
