use serde::{Deserialize, Serialize};
use spider_core::{Error, Reconstructor, Result, SparseMeasurement, StateWindow, TrafficSnapshot};

/// Spatial KNN interpolation (KNN-S).
///
/// Every unsampled cell takes the inverse-distance weighted mean of its
/// `k_nn` nearest sampled cells, measured between cell centers. Distance ties
/// go to the lower row-major index. Sampled cells keep their value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnS {
    pub k_nn: usize,
}

impl Default for KnnS {
    fn default() -> Self {
        Self { k_nn: 5 }
    }
}

pub fn knn_s(measurement: &SparseMeasurement, k_nn: usize) -> Result<TrafficSnapshot> {
    if k_nn == 0 {
        return Err(Error::Config("k_nn must be at least 1".into()));
    }
    let g = measurement.geometry();
    let sampled: Vec<(i64, i64, f64)> = measurement
        .mask
        .indices()
        .into_iter()
        .map(|i| {
            let (r, c) = g.coords(i);
            (r as i64, c as i64, measurement.values.as_slice()[i])
        })
        .collect();
    if sampled.is_empty() {
        return Err(Error::InsufficientData("no sampled cells to interpolate from".into()));
    }
    let k = k_nn.min(sampled.len());
    let mut out = measurement.values.clone();
    // (squared distance, position in `sampled`); `sampled` is row-major so the
    // position order is the tie-break order.
    let mut nearest: Vec<(i64, usize)> = Vec::with_capacity(sampled.len());
    for idx in 0..g.cells() {
        if measurement.mask.is_set(idx) {
            continue;
        }
        let (r, c) = g.coords(idx);
        let (r, c) = (r as i64, c as i64);
        nearest.clear();
        nearest.extend(sampled.iter().enumerate().map(|(p, &(sr, sc, _))| ((sr - r).pow(2) + (sc - c).pow(2), p)));
        nearest.select_nth_unstable(k - 1);
        let top = &mut nearest[..k];
        top.sort_unstable();
        let (mut num, mut den) = (0.0, 0.0);
        for &(d2, p) in top.iter() {
            let w = 1.0 / (d2 as f64).sqrt();
            num += w * sampled[p].2;
            den += w;
        }
        out.as_mut_slice()[idx] = num / den;
    }
    TrafficSnapshot::new(measurement.t, out)
}

impl Reconstructor for KnnS {
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot> {
        knn_s(window.current(), self.k_nn)
    }
}
