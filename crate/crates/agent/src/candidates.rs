//! Candidate subset: nearest cells to the pseudo action plus an
//! exponentially decaying share of random cells.

use rand::Rng;
use serde::{Deserialize, Serialize};
use spider_core::{sampling, GridGeometry};

use crate::net::PseudoAction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub cells: Vec<usize>,
    /// Random cells actually injected.
    pub n_random: usize,
}

/// `η = k(0.1 + 0.9·e^{−x})` rounded half to even.
pub fn eta(k: usize, x: f64) -> usize {
    let v = k as f64 * (0.1 + 0.9 * (-x.max(0.0)).exp());
    (v.round_ties_even() as usize).min(k)
}

/// Available cells ordered by distance from `a_hat` to their centers, ties
/// in row-major order.
pub fn nearest(geometry: GridGeometry, a_hat: PseudoAction, available: &[usize]) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = available
        .iter()
        .map(|&c| {
            let (r, q) = geometry.center(c);
            ((r - a_hat.row).powi(2) + (q - a_hat.col).powi(2), c)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, c)| c).collect()
}

/// `k − η` nearest available cells followed by `η` random available cells
/// not already chosen. Returns everything available when fewer than `k`.
pub fn candidate_subset_with_eta(geometry: GridGeometry, a_hat: PseudoAction, available: &[usize], k: usize, eta: usize, seed: u64) -> CandidateSet {
    if available.len() <= k {
        let mut cells = available.to_vec();
        cells.sort_unstable();
        return CandidateSet { cells, n_random: 0 };
    }
    let eta = eta.min(k);
    let mut cells = nearest(geometry, a_hat, available);
    cells.truncate(k - eta);
    let mut taken = vec![false; geometry.cells()];
    cells.iter().for_each(|&c| taken[c] = true);
    let mut rng = sampling::rng(seed);
    let mut n_random = 0;
    while n_random < eta {
        let c = available[rng.gen_range(0..available.len())];
        if !taken[c] {
            taken[c] = true;
            cells.push(c);
            n_random += 1;
        }
    }
    CandidateSet { cells, n_random }
}

/// Candidate subset after `x` completed training episodes.
pub fn candidate_subset(geometry: GridGeometry, a_hat: PseudoAction, available: &[usize], k: usize, x: f64, seed: u64) -> CandidateSet {
    candidate_subset_with_eta(geometry, a_hat, available, k, eta(k, x), seed)
}
