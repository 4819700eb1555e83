//! Instance generators shared by the benchmarks.

use rand::{rngs::StdRng, SeedableRng};
use robustz_core::synthetic;
use robustz_core::EffectMatrix;

/// Block-diagonal instance with about `nnz` eligible pairs in 10 x 10 blocks.
pub fn scaling_instance(nnz: usize, seed: u64) -> EffectMatrix {
    synthetic::block_instance((nnz / 100).max(1), 10, 10, 5.0, seed)
}

/// Dense `k x k` instance with effects in `[-100, 100)`.
pub fn dense_instance(k: usize, seed: u64) -> EffectMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    synthetic::random_instance(k, k, 1.0, -100.0, 100.0, &mut rng)
}
