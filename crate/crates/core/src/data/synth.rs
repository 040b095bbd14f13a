//! Diurnal hotspot traffic generator for desk-scale experiments.
//!
//! Cell `(i, j)` at time `t` carries
//! `W(t) · (base + K(i, j) · A · s(h)) + n`, where `K` is a sum of Gaussian
//! hotspots, `s(h)` a raised cosine over the hour of day centred at 13:30,
//! `W(t)` the weekend factor and `n` truncated Gaussian noise whose scale
//! grows with `s(h)` by `peak_noise_boost`. Values are clipped at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::series::DatasetSeries;
use crate::calendar::Clock;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridGeometry, TrafficSnapshot};

/// 2013-11-04 00:00 UTC, a Monday.
pub const DEFAULT_START_MS: i64 = 1_383_523_200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub geometry: GridGeometry,
    pub days: usize,
    pub delta_minutes: u32,
    pub seed: u64,
    pub base_level: f64,
    pub peak_amplitude: f64,
    pub n_hotspots: usize,
    pub noise_std: f64,
    pub weekend_scale: f64,
    #[serde(default = "default_boost")]
    pub peak_noise_boost: f64,
    /// Hotspot widths are drawn from this range, in cells.
    #[serde(default = "default_width")]
    pub hotspot_width: (f64, f64),
    #[serde(default = "default_start")]
    pub start_ms: i64,
}

fn default_boost() -> f64 {
    1.0
}

fn default_width() -> (f64, f64) {
    (1.5, 3.5)
}

fn default_start() -> i64 {
    DEFAULT_START_MS
}

impl Default for SyntheticConfig {
    /// Desk scale: 20x20 cells, 10-minute steps, 10 days.
    fn default() -> Self {
        Self {
            geometry: GridGeometry { rows: 20, cols: 20, cell_area_km2: None },
            days: 10,
            delta_minutes: 10,
            seed: 7,
            base_level: 4.0,
            peak_amplitude: 120.0,
            n_hotspots: 6,
            noise_std: 1.0,
            weekend_scale: 0.6,
            peak_noise_boost: default_boost(),
            hotspot_width: default_width(),
            start_ms: DEFAULT_START_MS,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.geometry.rows == 0 || self.geometry.cols == 0 {
            return bad("empty geometry".into());
        }
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        if self.delta_minutes == 0 || 1440 % self.delta_minutes != 0 {
            return bad(format!("step must divide a day, got {}", self.delta_minutes));
        }
        if !(self.base_level > 0.0) || !(self.peak_amplitude >= 0.0) {
            return bad("base level must be positive and amplitude non-negative".into());
        }
        if !(self.noise_std >= 0.0) || !(self.peak_noise_boost >= 0.0) {
            return bad("noise parameters must be non-negative".into());
        }
        if !(self.weekend_scale > 0.0 && self.weekend_scale <= 1.0) {
            return bad(format!("weekend scale must lie in (0, 1], got {}", self.weekend_scale));
        }
        let (lo, hi) = self.hotspot_width;
        if !(lo > 0.0 && hi >= lo) {
            return bad(format!("bad hotspot width range {lo}..{hi}"));
        }
        if self.start_ms.rem_euclid(self.delta_minutes as i64 * 60_000) != 0 {
            return bad("start must fall on a step boundary".into());
        }
        Ok(())
    }
}

/// Diurnal activity in [0, 1], peaking at 13:30.
pub fn diurnal_shape(hour: f64) -> f64 {
    0.5 * (1.0 + (2.0 * std::f64::consts::PI * (hour - 13.5) / 24.0).cos())
}

pub fn synthesize_traffic(config: &SyntheticConfig) -> Result<DatasetSeries> {
    config.validate()?;
    let g = config.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut kernel = vec![0.0; g.cells()];
    for _ in 0..config.n_hotspots {
        let cr = rng.gen::<f64>() * g.rows as f64;
        let cc = rng.gen::<f64>() * g.cols as f64;
        let (lo, hi) = config.hotspot_width;
        let width = lo + rng.gen::<f64>() * (hi - lo);
        let weight = 0.5 + 0.5 * rng.gen::<f64>();
        for (idx, k) in kernel.iter_mut().enumerate() {
            let (r, c) = g.center(idx);
            let d2 = (r - cr).powi(2) + (c - cc).powi(2);
            *k += weight * (-d2 / (2.0 * width * width)).exp();
        }
    }

    let clock = Clock::new(config.delta_minutes);
    let t0 = config.start_ms / (config.delta_minutes as i64 * 60_000);
    let steps = config.days * clock.steps_per_day();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut snapshots = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = t0 + k as i64;
        let local = clock.local(t);
        let hour = chrono::Timelike::hour(&local) as f64 + chrono::Timelike::minute(&local) as f64 / 60.0;
        let shape = diurnal_shape(hour);
        let day = if clock.day_of_week(t) >= 5 { config.weekend_scale } else { 1.0 };
        let activity = config.peak_amplitude * shape;
        let sigma = config.noise_std * (1.0 + config.peak_noise_boost * shape);
        let values = kernel
            .iter()
            .map(|&kv| {
                let mean = day * (config.base_level + kv * activity);
                let noise = if sigma > 0.0 {
                    // truncated at three standard deviations
                    let z: f64 = unit.sample(&mut rng);
                    sigma * z.clamp(-3.0, 3.0)
                } else {
                    0.0
                };
                (mean + noise).max(0.0)
            })
            .collect();
        snapshots.push(TrafficSnapshot::new(t, Grid::from_vec(g.rows, g.cols, values)?)?);
    }
    DatasetSeries::new(g, config.delta_minutes, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig { geometry: GridGeometry::new(5, 4).unwrap(), days: 7, delta_minutes: 60, ..Default::default() }
    }

    #[test]
    fn degenerate_config_is_flat() {
        let cfg = SyntheticConfig { noise_std: 0.0, n_hotspots: 0, peak_amplitude: 0.0, weekend_scale: 1.0, ..small() };
        let s = synthesize_traffic(&cfg).unwrap();
        assert!(s.snapshots().iter().all(|f| f.values.as_slice().iter().all(|&v| v == cfg.base_level)));
        // with a weekend factor the weekdays still sit exactly at the base level
        let cfg = SyntheticConfig { weekend_scale: 0.5, ..cfg };
        let s = synthesize_traffic(&cfg).unwrap();
        let clock = s.clock();
        for f in s.snapshots().iter().filter(|f| clock.day_of_week(f.t) < 5) {
            assert!(f.values.as_slice().iter().all(|&v| v == cfg.base_level));
        }
    }

    #[test]
    fn same_seed_same_series() {
        let a = synthesize_traffic(&small()).unwrap();
        let b = synthesize_traffic(&small()).unwrap();
        assert_eq!(a, b);
        let c = synthesize_traffic(&SyntheticConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn weekend_peak_is_scaled() {
        let cfg = SyntheticConfig { weekend_scale: 0.5, noise_std: 0.0, ..small() };
        let s = synthesize_traffic(&cfg).unwrap();
        let clock = s.clock();
        let cells = cfg.geometry.cells();
        let peak_mean = |weekend: bool| {
            let frames: Vec<_> = s
                .snapshots()
                .iter()
                .filter(|f| (clock.day_of_week(f.t) >= 5) == weekend && (9..18).contains(&clock.hour_of_day(f.t)))
                .collect();
            (0..cells)
                .map(|c| frames.iter().map(|f| f.values.as_slice()[c]).sum::<f64>() / frames.len() as f64)
                .collect::<Vec<_>>()
        };
        let (wd, we) = (peak_mean(false), peak_mean(true));
        for c in 0..cells {
            assert!((we[c] - 0.5 * wd[c]).abs() < 1e-9 * wd[c].max(1.0), "cell {c}: {} vs {}", we[c], wd[c]);
        }
    }

    #[test]
    fn always_non_negative_and_starts_monday() {
        let cfg = SyntheticConfig { noise_std: 50.0, ..small() };
        let s = synthesize_traffic(&cfg).unwrap();
        assert!(s.snapshots().iter().all(|f| f.values.as_slice().iter().all(|&v| v >= 0.0)));
        assert_eq!(s.len(), 7 * 24);
        assert_eq!(s.clock().day_of_week(s.first_t().unwrap()), 0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(synthesize_traffic(&SyntheticConfig { weekend_scale: 0.0, ..small() }).is_err());
        assert!(synthesize_traffic(&SyntheticConfig { days: 0, ..small() }).is_err());
    }
}
