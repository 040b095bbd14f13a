//! Seeded random selection helpers shared by training and baselines.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{GridGeometry, SelectionMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a master seed and a label.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exactly `count` distinct cells chosen uniformly (clamped to the grid size).
pub fn random_selection<R: Rng>(t: i64, geometry: GridGeometry, count: usize, rng: &mut R) -> SelectionMatrix {
    let n = geometry.cells();
    let mut m = SelectionMatrix::empty(t, geometry);
    for i in index::sample(rng, n, count.min(n)).iter() {
        m.set(i, true);
    }
    m
}

/// `round(rate · cells)` distinct uniform cells.
pub fn random_selection_rate<R: Rng>(t: i64, geometry: GridGeometry, rate: f64, rng: &mut R) -> SelectionMatrix {
    let count = (rate.clamp(0.0, 1.0) * geometry.cells() as f64).round() as usize;
    random_selection(t, geometry, count, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_exact() {
        let g = GridGeometry::new(4, 5).unwrap();
        let mut r = rng(1);
        assert_eq!(random_selection(0, g, 7, &mut r).count_ones(), 7);
        assert_eq!(random_selection(0, g, 99, &mut r).count_ones(), 20);
        assert_eq!(random_selection_rate(0, g, 0.35, &mut r).count_ones(), 7);
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
    }
}
