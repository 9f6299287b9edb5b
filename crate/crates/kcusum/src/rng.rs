//! Seed-derived random streams.
//!
//! All randomness in this crate flows through ChaCha8 generators derived from
//! a single `u64` master seed. A generator is identified by the master seed,
//! a three-component path, and a domain tag:
//!
//! * the 32-byte ChaCha key is the little-endian packing of
//!   `(master_seed, path[0], path[1], path[2])`;
//! * the domain selects one of ChaCha's 2^64 independent streams.
//!
//! Distinct `(seed, path, domain)` tuples give independent streams, and the
//! same tuple reproduces the same draws on every platform and at every thread
//! count. The evaluation harness uses the path `(task, threshold, replicate)`
//! so that adding replicates or reordering work never perturbs earlier draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tag: the monitored observation stream.
pub const DOMAIN_DATA: u64 = 1;
/// Domain tag: reference draws consumed by a kernel detector.
pub const DOMAIN_REFERENCE: u64 = 2;
/// Domain tag: Monte Carlo oracle chunks.
pub const DOMAIN_ORACLE: u64 = 3;

/// Derive the ChaCha8 stream for `(master_seed, path, domain)`.
pub fn stream_rng(master_seed: u64, path: [u64; 3], domain: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&path[0].to_le_bytes());
    key[16..24].copy_from_slice(&path[1].to_le_bytes());
    key[24..32].copy_from_slice(&path[2].to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(domain);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_tuple_same_draws() {
        let mut a = stream_rng(7, [1, 2, 3], DOMAIN_DATA);
        let mut b = stream_rng(7, [1, 2, 3], DOMAIN_DATA);
        for _ in 0..64 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn distinct_components_change_the_stream() {
        let base: Vec<u64> = {
            let mut r = stream_rng(7, [1, 2, 3], DOMAIN_DATA);
            (0..8).map(|_| r.random()).collect()
        };
        for (seed, path, domain) in [
            (8, [1, 2, 3], DOMAIN_DATA),
            (7, [0, 2, 3], DOMAIN_DATA),
            (7, [1, 0, 3], DOMAIN_DATA),
            (7, [1, 2, 0], DOMAIN_DATA),
            (7, [1, 2, 3], DOMAIN_REFERENCE),
        ] {
            let mut r = stream_rng(seed, path, domain);
            let other: Vec<u64> = (0..8).map(|_| r.random()).collect();
            assert_ne!(base, other);
        }
    }
}
