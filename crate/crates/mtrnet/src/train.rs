//! Supervised training on randomly masked windows under MAE loss.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use spider_core::data::{fit_normalizer, DatasetSeries};
use spider_core::sampling::{derive_seed, random_selection_rate, rng};
use spider_core::{Error, GridGeometry, NormStats, Result};
use spider_nn::{Act, Adam, AdamConfig};

use crate::model::MtrnetModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub mask_rate_range: (f64, f64),
    pub seed: u64,
    /// Trailing share of the training windows held out for validation.
    pub validation_fraction: f64,
    /// Windows drawn per epoch; `None` uses every training window.
    pub samples_per_epoch: Option<usize>,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 128,
            epochs: 20,
            mask_rate_range: (0.10, 0.70),
            seed: 0,
            validation_fraction: 0.1,
            samples_per_epoch: None,
            lr_decay: 1.0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.mask_rate_range;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!("mask rate range must satisfy 0 < low <= high < 1, got ({lo}, {hi})")));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::Config("learning rate and batch size must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("learning-rate decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!("validation fraction must lie in [0, 1), got {}", self.validation_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_val_mae: f64,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were kept (0 = the initial parameters).
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn final_val_mae(&self) -> f64 {
        if self.best_epoch == 0 {
            self.initial_val_mae
        } else {
            self.epochs[self.best_epoch - 1].val_mae
        }
    }
}

/// A normalized series with its frames as flat vectors.
pub(crate) struct Frames {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl Frames {
    pub fn new(series: &DatasetSeries, norm: NormStats) -> Result<Self> {
        let s = series.normalized(&norm)?;
        Ok(Self { rows: s.geometry.rows, cols: s.geometry.cols, data: s.snapshots().iter().map(|f| f.values.as_slice().to_vec()).collect() })
    }

    /// Masked window ending at `pos`, every frame sampled at `rate`, with
    /// the current frame's mask.
    pub fn masked_window<R: Rng>(&self, pos: usize, frames: usize, rate: f64, mask_planes: bool, rng: &mut R) -> (Act, Vec<bool>) {
        let cells = self.rows * self.cols;
        let planes = if mask_planes { 2 } else { 1 };
        let mut data = Vec::with_capacity(planes * frames * cells);
        let mut masks = Vec::with_capacity(frames * cells);
        let geometry = GridGeometry { rows: self.rows, cols: self.cols, cell_area_km2: None };
        let mut mask = Vec::new();
        for f in &self.data[pos + 1 - frames..=pos] {
            let sel = random_selection_rate(0, geometry, rate, rng);
            data.extend(f.iter().zip(sel.bits()).map(|(&v, &on)| if on { v } else { 0.0 }));
            masks.extend(sel.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }));
            mask = sel.bits().to_vec();
        }
        if mask_planes {
            data.extend(masks);
        }
        (Act::from_vec(planes * frames, self.rows, self.cols, data), mask)
    }
}

/// Mean absolute error between `out` and `target`, and its gradient.
///
/// Cells flagged in `measured` are taken from the target (they are passed
/// through at inference), so they add neither loss nor gradient.
pub fn mae_loss(out: &Act, target: &[f64], measured: Option<&[bool]>) -> (f64, Act) {
    let n = target.len() as f64;
    let mut grad = Act::zeros(out.c, out.h, out.w);
    let mut loss = 0.0;
    for (k, (g, (&o, &t))) in grad.data.iter_mut().zip(out.data.iter().zip(target)).enumerate() {
        if measured.is_some_and(|m| m[k]) {
            continue;
        }
        loss += (o - t).abs();
        *g = if o > t { 1.0 / n } else if o < t { -1.0 / n } else { 0.0 };
    }
    (loss / n, grad)
}

fn clipped_mae(out: &Act, target: &[f64], measured: Option<&[bool]>) -> f64 {
    let err = |k: usize, o: f64, t: f64| if measured.is_some_and(|m| m[k]) { 0.0 } else { (o.max(0.0) - t).abs() };
    out.data.iter().zip(target).enumerate().map(|(k, (&o, &t))| err(k, o, t)).sum::<f64>() / target.len() as f64
}

pub fn mtrnet_train(model: &mut MtrnetModel, train: &DatasetSeries, hyper: &TrainHyper) -> Result<TrainHistory> {
    hyper.validate()?;
    let frames = model.config.window_frames;
    if train.len() < frames {
        return Err(Error::Range(format!("series of {} frames is shorter than the {frames}-frame window", train.len())));
    }
    let norm = match model.norm {
        Some(n) => n,
        None => fit_normalizer(train)?,
    };
    model.norm = Some(norm);
    let data = Frames::new(train, norm)?;

    let positions: Vec<usize> = (frames - 1..train.len()).collect();
    let n_val = ((positions.len() as f64 * hyper.validation_fraction).ceil() as usize).min(positions.len() - 1);
    let (train_pos, val_pos) = if n_val == 0 {
        (positions.clone(), positions.clone())
    } else {
        let (a, b) = positions.split_at(positions.len() - n_val);
        (a.to_vec(), b.to_vec())
    };

    let (lo, hi) = hyper.mask_rate_range;
    let mut val_rng = rng(derive_seed(hyper.seed, 1));
    let keep = model.config.keep_measured;
    let mask_planes = model.config.mask_input;
    let val_set: Vec<((Act, Vec<bool>), usize)> = val_pos
        .iter()
        .map(|&p| {
            let rate = val_rng.gen_range(lo..=hi);
            (data.masked_window(p, frames, rate, mask_planes, &mut val_rng), p)
        })
        .collect();
    let validate = |m: &MtrnetModel| val_set.iter().map(|(x, p)| clipped_mae(&m.forward(&x.0).out, &data.data[*p], keep.then_some(&x.1[..]))).sum::<f64>() / val_set.len() as f64;

    let initial_val_mae = validate(model);
    let mut best = (initial_val_mae, 0usize, model.params.clone());
    let mut opt = Adam::new(AdamConfig { learning_rate: hyper.learning_rate, ..AdamConfig::default() }, &model.params);
    let mut grads = model.params.zero_grads();
    let mut train_rng = rng(derive_seed(hyper.seed, 2));
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 1..=hyper.epochs {
        let mut order = train_pos.clone();
        order.shuffle(&mut train_rng);
        if let Some(n) = hyper.samples_per_epoch {
            order.truncate(n.max(1));
        }
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            grads.clear();
            for &p in batch {
                let rate = train_rng.gen_range(lo..=hi);
                let (x, measured) = data.masked_window(p, frames, rate, mask_planes, &mut train_rng);
                let trace = model.forward(&x);
                let (loss, dout) = mae_loss(&trace.out, &data.data[p], keep.then_some(&measured[..]));
                total += loss;
                model.backbone().backward(&model.params, &mut grads, &trace, &dout);
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.step(&mut model.params, &grads);
        }
        let train_mae = total / order.len() as f64;
        if !train_mae.is_finite() || !model.params.all_finite() {
            return Err(Error::Domain(format!("training diverged in epoch {epoch}")));
        }
        let val_mae = validate(model);
        log::info!("epoch {epoch}: train MAE {train_mae:.5}, validation MAE {val_mae:.5}");
        if val_mae < best.0 {
            best = (val_mae, epoch, model.params.clone());
        }
        history.push(EpochStats { epoch, train_mae, val_mae });
        opt.config.learning_rate *= hyper.lr_decay;
    }
    model.params = best.2;
    Ok(TrainHistory { initial_val_mae, epochs: history, best_epoch: best.1 })
}
