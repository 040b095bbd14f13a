use serde::{Deserialize, Serialize};

use crate::calendar::Clock;
use crate::error::{Error, Result};
use crate::grid::{apply_mask, GridGeometry, SelectionMatrix, SparseMeasurement, StateWindow, TrafficSnapshot};
use crate::norm::NormStats;

/// Time-ordered snapshots sharing one geometry and step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSeries {
    pub geometry: GridGeometry,
    pub delta_minutes: u32,
    snapshots: Vec<TrafficSnapshot>,
}

impl DatasetSeries {
    pub fn new(geometry: GridGeometry, delta_minutes: u32, snapshots: Vec<TrafficSnapshot>) -> Result<Self> {
        if delta_minutes == 0 || 1440 % delta_minutes != 0 {
            return Err(Error::Config(format!("step must divide a day, got {delta_minutes} minutes")));
        }
        for pair in snapshots.windows(2) {
            if pair[1].t != pair[0].t + 1 {
                return Err(Error::Consistency(format!(
                    "snapshots must be contiguous, got t={} then t={}",
                    pair[0].t, pair[1].t
                )));
            }
        }
        for s in &snapshots {
            geometry.check_same(&s.geometry(), "series snapshot")?;
        }
        Ok(Self { geometry, delta_minutes, snapshots })
    }

    pub fn snapshots(&self) -> &[TrafficSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn clock(&self) -> Clock {
        Clock::new(self.delta_minutes)
    }

    pub fn steps_per_day(&self) -> usize {
        self.clock().steps_per_day()
    }

    pub fn first_t(&self) -> Option<i64> {
        self.snapshots.first().map(|s| s.t)
    }

    /// Absolute timestamps covered by the series.
    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.snapshots.iter().map(|s| s.t)
    }

    pub fn contains(&self, t: i64) -> bool {
        self.position(t).is_some()
    }

    fn position(&self, t: i64) -> Option<usize> {
        let first = self.first_t()?;
        let k = t.checked_sub(first)?;
        (k >= 0 && (k as usize) < self.snapshots.len()).then_some(k as usize)
    }

    pub fn get(&self, t: i64) -> Result<&TrafficSnapshot> {
        self.position(t)
            .map(|k| &self.snapshots[k])
            .ok_or_else(|| Error::Range(format!("t={t} not in series")))
    }

    /// Sub-series of snapshots at positions `range` (not timestamps).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.snapshots.len() || range.start > range.end {
            return Err(Error::Range(format!("slice {range:?} of {} snapshots", self.snapshots.len())));
        }
        Ok(Self {
            geometry: self.geometry,
            delta_minutes: self.delta_minutes,
            snapshots: self.snapshots[range].to_vec(),
        })
    }

    /// Same series in normalized space.
    pub fn normalized(&self, stats: &NormStats) -> Result<Self> {
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| Ok(TrafficSnapshot { t: s.t, values: stats.normalize(&s.values)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { geometry: self.geometry, delta_minutes: self.delta_minutes, snapshots })
    }

    /// Masks the `selections.len()` snapshots ending at `t` into a window.
    pub fn masked_window(&self, t: i64, selections: &[SelectionMatrix]) -> Result<StateWindow> {
        let n = selections.len() as i64;
        let frames = selections
            .iter()
            .enumerate()
            .map(|(k, sel)| {
                let ts = t - n + 1 + k as i64;
                let mut sel = sel.clone();
                sel.t = ts;
                apply_mask(self.get(ts)?, &sel)
            })
            .collect::<Result<Vec<SparseMeasurement>>>()?;
        StateWindow::new(frames)
    }
}

/// Contiguous train-then-test split, in whole days from the series start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_days: usize,
    pub test_days: usize,
}

pub fn split(series: &DatasetSeries, spec: SplitSpec) -> Result<(DatasetSeries, DatasetSeries)> {
    if spec.train_days == 0 || spec.test_days == 0 {
        return Err(Error::Config("train and test must each cover at least one day".into()));
    }
    let per_day = series.steps_per_day();
    let days = series.len() / per_day;
    if spec.train_days + spec.test_days > days {
        return Err(Error::Range(format!(
            "split of {}+{} days exceeds the {days} whole days available",
            spec.train_days, spec.test_days
        )));
    }
    let cut = spec.train_days * per_day;
    let end = cut + spec.test_days * per_day;
    Ok((series.slice(0..cut)?, series.slice(cut..end)?))
}

/// Mean of `log(1 + x)` over every cell and timestamp of the training split.
pub fn fit_normalizer(train: &DatasetSeries) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::EmptyInput("cannot fit normalization on an empty series".into()));
    }
    let (sum, count) = train.snapshots().iter().fold((0.0, 0usize), |(s, n), snap| {
        (s + snap.values.as_slice().iter().map(|x| x.ln_1p()).sum::<f64>(), n + snap.values.len())
    });
    NormStats::new(sum / count as f64)
}
