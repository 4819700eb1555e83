//! Seeded synthetic instances for tests and benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::matching::EffectMatrix;

/// Disjoint fully-eligible `rows x cols` blocks, as exact matching on a
/// categorical key produces. Outcomes are uniform on `[0, 100)` with treated
/// outcomes shifted by `shift`; each effect is `y_t - y_c`.
pub fn block_instance(
    blocks: usize,
    rows: usize,
    cols: usize,
    shift: f64,
    seed: u64,
) -> EffectMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(blocks * rows * cols);
    for b in 0..blocks {
        let y_t: Vec<f64> = (0..rows)
            .map(|_| rng.gen_range(0.0..100.0) + shift)
            .collect();
        let y_c: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.0..100.0)).collect();
        for (r, yt) in y_t.iter().enumerate() {
            for (c, yc) in y_c.iter().enumerate() {
                triplets.push((b * rows + r, b * cols + c, yt - yc));
            }
        }
    }
    EffectMatrix::from_triplets(blocks * rows, blocks * cols, triplets)
        .expect("generated indices are distinct")
}

/// Uniform effects on `[lo, hi)` over a random eligibility pattern in which
/// each cell is present with probability `density`.
pub fn random_instance(
    n_treated: usize,
    n_control: usize,
    density: f64,
    lo: f64,
    hi: f64,
    rng: &mut impl Rng,
) -> EffectMatrix {
    let mut triplets = Vec::new();
    for i in 0..n_treated {
        for j in 0..n_control {
            if rng.gen_bool(density) {
                triplets.push((i, j, rng.gen_range(lo..hi)));
            }
        }
    }
    EffectMatrix::from_triplets(n_treated, n_control, triplets)
        .expect("generated indices are distinct")
}
