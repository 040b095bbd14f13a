//! Online evaluation of a selection strategy over a test period: each
//! timestamp's selection sees the strategy's own earlier selections as
//! history, the reconstructor fills the map, and errors are grouped by
//! evaluation bucket.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use spider_agent::history_window;
use spider_core::data::DatasetSeries;
use spider_core::{apply_mask, mae, nmae, Bucket, BucketConfig, Reconstructor, Result, SelectionMatrix, StateWindow};

/// Anything that decides, from past sparse frames, which cells to collect.
pub trait Selector {
    fn select(&self, window: &StateWindow, time: [f64; 3]) -> Result<SelectionMatrix>;
}

impl<S: Selector + ?Sized> Selector for &S {
    fn select(&self, window: &StateWindow, time: [f64; 3]) -> Result<SelectionMatrix> {
        (**self).select(window, time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub t: i64,
    pub count: usize,
    pub mae: f64,
    pub nmae: f64,
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub bucket: Bucket,
    pub n: usize,
    /// `None` when the bucket has no timestamps in the test period.
    pub mean_count: Option<f64>,
    pub mean_nmae: Option<f64>,
    pub mean_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    /// One entry per bucket, in [`Bucket::ALL`] order.
    pub buckets: Vec<BucketSummary>,
    /// The selection made at each record's timestamp.
    #[serde(default)]
    pub selections: Vec<SelectionMatrix>,
}

impl EvalReport {
    pub fn bucket(&self, b: Bucket) -> &BucketSummary {
        self.buckets.iter().find(|s| s.bucket == b).expect("every bucket is reported")
    }

    pub fn mean_latency_s(&self) -> f64 {
        self.records.iter().map(|r| r.latency_s).sum::<f64>() / self.records.len().max(1) as f64
    }
}

/// Groups per-timestamp records into bucket means.
pub fn summarize(records: &[EvalRecord], clock: &spider_core::Clock, buckets: &BucketConfig) -> Vec<BucketSummary> {
    let mut acc: HashMap<Bucket, (usize, f64, f64, f64)> = HashMap::new();
    for r in records {
        for b in buckets.buckets_of(clock, r.t) {
            let e = acc.entry(b).or_default();
            e.0 += 1;
            e.1 += r.count as f64;
            e.2 += r.nmae;
            e.3 += r.mae;
        }
    }
    Bucket::ALL
        .iter()
        .map(|&bucket| match acc.get(&bucket) {
            Some(&(n, c, e, m)) => {
                let n_f = n as f64;
                BucketSummary { bucket, n, mean_count: Some(c / n_f), mean_nmae: Some(e / n_f), mean_mae: Some(m / n_f) }
            }
            None => BucketSummary { bucket, n: 0, mean_count: None, mean_nmae: None, mean_mae: None },
        })
        .collect()
}

/// Runs `selector` over every timestamp of the normalized `truth` series in
/// order. The selector sees `window_frames` frames; the reconstructor gets
/// the trailing frames it declares.
pub fn evaluate_selector<S: Selector + ?Sized, R: Reconstructor + ?Sized>(
    selector: &S,
    truth: &DatasetSeries,
    reconstructor: &R,
    window_frames: usize,
    buckets: &BucketConfig,
) -> Result<EvalReport> {
    let clock = truth.clock();
    let mut past = HashMap::new();
    let mut records = Vec::with_capacity(truth.len());
    let mut selections = Vec::with_capacity(truth.len());
    let need = reconstructor.window_frames();
    let frames = window_frames.max(need);
    for t in truth.timestamps() {
        let window = history_window(truth, t, frames, &past)?;
        let time = clock.time_features(t);
        let start = Instant::now();
        let view = if window_frames < frames { window.tail(window_frames)? } else { window.clone() };
        let mut sel = selector.select(&view, time)?;
        let latency_s = start.elapsed().as_secs_f64();
        sel.t = t;
        let snapshot = truth.get(t)?;
        let measured = window.with_current(apply_mask(snapshot, &sel)?)?;
        let est = reconstructor.reconstruct(&measured.tail(need)?)?;
        records.push(EvalRecord { t, count: sel.count_ones(), mae: mae(&est, snapshot)?, nmae: nmae(&est, snapshot)?, latency_s });
        past.insert(t, sel.clone());
        selections.push(sel);
    }
    let buckets = summarize(&records, &clock, buckets);
    Ok(EvalReport { records, buckets, selections })
}
