//! Random and historical-frequency selection baselines and the per-bucket
//! budget they are run at.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use spider_core::data::DatasetSeries;
use spider_core::sampling::{derive_seed, random_selection, rng};
use spider_core::{apply_mask, mae, Clock, Error, GridGeometry, Reconstructor, Result, SelectionMatrix, SparseMeasurement, StateWindow};
use spider_policy::Selector;

/// Draws per budget evaluation and the binary-search step bound.
pub const BUDGET_MASKS: usize = 20;
pub const BUDGET_MAX_ITERATIONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub count: f64,
    /// ε was not reached even with every cell selected.
    pub unreachable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub day: u32,
    pub hour: u32,
    pub count: f64,
    pub unreachable: bool,
}

/// Cells needed to reach ε per (day of week, hour of day).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetTable {
    pub cells: usize,
    pub entries: Vec<BudgetEntry>,
}

impl BudgetTable {
    /// Exact slot, else the same hour on other days, else the overall mean.
    pub fn lookup(&self, clock: &Clock, t: i64) -> f64 {
        let (d, h) = (clock.day_of_week(t), clock.hour_of_day(t));
        if let Some(e) = self.entries.iter().find(|e| e.day == d && e.hour == h) {
            return e.count;
        }
        let mean = |it: Vec<f64>| (!it.is_empty()).then(|| it.iter().sum::<f64>() / it.len() as f64);
        let fallback = mean(self.entries.iter().filter(|e| e.hour == h).map(|e| e.count).collect())
            .or_else(|| mean(self.entries.iter().map(|e| e.count).collect()))
            .unwrap_or(self.cells as f64);
        log::warn!("no budget for day {d} hour {h}; using {fallback:.1}");
        fallback
    }

    pub fn count(&self, clock: &Clock, t: i64) -> usize {
        (self.lookup(clock, t).round() as usize).min(self.cells)
    }
}

/// A window ending at `t` whose frames each keep the first `n` cells of a
/// fixed per-frame permutation; frames before the series start are empty.
fn nested_window(truth: &DatasetSeries, t: i64, perms: &[Vec<usize>], n: usize) -> Result<StateWindow> {
    let g = truth.geometry;
    let frames = perms.len() as i64;
    let out = perms
        .iter()
        .enumerate()
        .map(|(k, perm)| {
            let ts = t - frames + 1 + k as i64;
            if !truth.contains(ts) {
                return Ok(SparseMeasurement::empty(ts, g));
            }
            let sel = SelectionMatrix::from_indices(ts, g, &perm[..n.min(perm.len())])?;
            apply_mask(truth.get(ts)?, &sel)
        })
        .collect::<Result<Vec<_>>>()?;
    StateWindow::new(out)
}

/// Smallest random cell count whose MAE, averaged over `masks` draws spread
/// across `timestamps`, falls below `epsilon`. At least one cell is always
/// required unless ε is infinite. `truth` is normalized.
pub fn random_budget<R: Reconstructor + ?Sized>(truth: &DatasetSeries, reconstructor: &R, timestamps: &[i64], epsilon: f64, masks: usize, seed: u64) -> Result<Budget> {
    if timestamps.is_empty() || masks == 0 {
        return Err(Error::EmptyInput("budget search needs timestamps and masks".into()));
    }
    if epsilon == f64::INFINITY {
        return Ok(Budget { count: 0.0, unreachable: false });
    }
    let g = truth.geometry;
    let cells = g.cells();
    let frames = reconstructor.window_frames();
    let draws: Vec<(i64, Vec<Vec<usize>>)> = (0..masks)
        .map(|j| {
            let mut r = rng(derive_seed(seed, j as u64));
            let t = timestamps[j % timestamps.len()];
            let perms = (0..frames)
                .map(|_| {
                    let mut p: Vec<usize> = (0..cells).collect();
                    p.shuffle(&mut r);
                    p
                })
                .collect();
            (t, perms)
        })
        .collect();
    search_budget(truth, reconstructor, &draws, epsilon)
}

/// Binary search for the smallest `n` whose mean MAE over `draws` falls
/// below `epsilon`, where each draw keeps the first `n` cells of its
/// per-frame orderings.
fn search_budget<R: Reconstructor + ?Sized>(truth: &DatasetSeries, reconstructor: &R, draws: &[(i64, Vec<Vec<usize>>)], epsilon: f64) -> Result<Budget> {
    let cells = truth.geometry.cells();
    let mean_mae = |n: usize| -> Result<f64> {
        let mut total = 0.0;
        for (t, perms) in draws {
            let w = nested_window(truth, *t, perms, n)?;
            total += mae(&reconstructor.reconstruct(&w)?, truth.get(*t)?)?;
        }
        Ok(total / draws.len() as f64)
    };
    if mean_mae(cells)? >= epsilon {
        return Ok(Budget { count: cells as f64, unreachable: true });
    }
    let (mut lo, mut hi) = (1usize, cells);
    for _ in 0..BUDGET_MAX_ITERATIONS {
        if lo >= hi {
            break;
        }
        let mid = lo + (hi - lo) / 2;
        if mean_mae(mid)? < epsilon {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Budget { count: hi as f64, unreachable: false })
}

fn slots(truth: &DatasetSeries) -> BTreeMap<(u32, u32), Vec<i64>> {
    let clock = truth.clock();
    let mut slots: BTreeMap<(u32, u32), Vec<i64>> = BTreeMap::new();
    for t in truth.timestamps() {
        slots.entry((clock.day_of_week(t), clock.hour_of_day(t))).or_default().push(t);
    }
    slots
}

fn table_from<F: FnMut(u32, u32, &[i64]) -> Result<Budget>>(truth: &DatasetSeries, mut search: F) -> Result<BudgetTable> {
    let entries = slots(truth)
        .into_iter()
        .map(|((day, hour), ts)| {
            let b = search(day, hour, &ts)?;
            if b.unreachable {
                log::warn!("ε unreachable for day {day} hour {hour}; budget set to every cell");
            }
            Ok(BudgetEntry { day, hour, count: b.count, unreachable: b.unreachable })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BudgetTable { cells: truth.geometry.cells(), entries })
}

/// Cells ordered by descending frequency, ties in row-major order.
fn frequency_order(freq: &FrequencyMatrix, clock: &Clock, t: i64) -> Vec<usize> {
    let f = freq.lookup(clock, t);
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    order
}

/// Budget of the historical strategy: per slot, the smallest top-frequency
/// cell count whose mean MAE over the slot's timestamps falls below ε. Each
/// window frame keeps the top cells of its own slot.
pub fn build_historical_budget<R: Reconstructor + ?Sized>(truth: &DatasetSeries, reconstructor: &R, freq: &FrequencyMatrix, epsilon: f64) -> Result<BudgetTable> {
    let clock = truth.clock();
    let frames = reconstructor.window_frames() as i64;
    table_from(truth, |_, _, ts| {
        if epsilon == f64::INFINITY {
            return Ok(Budget { count: 0.0, unreachable: false });
        }
        let draws: Vec<(i64, Vec<Vec<usize>>)> = ts.iter().map(|&t| (t, (t - frames + 1..=t).map(|f| frequency_order(freq, &clock, f)).collect())).collect();
        search_budget(truth, reconstructor, &draws, epsilon)
    })
}

/// One budget search per (day of week, hour) slot present in `truth`.
pub fn build_budget_table<R: Reconstructor + ?Sized>(truth: &DatasetSeries, reconstructor: &R, epsilon: f64, seed: u64) -> Result<BudgetTable> {
    table_from(truth, |day, hour, ts| random_budget(truth, reconstructor, ts, epsilon, BUDGET_MASKS, derive_seed(seed, (day * 24 + hour) as u64)))
}

/// Exactly `round(budget)` distinct uniform cells.
pub fn random_baseline(budget: &BudgetTable, geometry: GridGeometry, clock: &Clock, t: i64, seed: u64) -> SelectionMatrix {
    random_selection(t, geometry, budget.count(clock, t), &mut rng(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub day: u32,
    pub hour: u32,
    pub n: usize,
    pub freq: Vec<f64>,
}

/// Mean selection matrix per (day of week, hour).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<FrequencyEntry>,
}

impl FrequencyMatrix {
    pub fn geometry(&self) -> GridGeometry {
        GridGeometry { rows: self.rows, cols: self.cols, cell_area_km2: None }
    }

    /// Frequencies for the slot of `t`; a zero grid (with a warning) when the
    /// slot never occurred.
    pub fn lookup(&self, clock: &Clock, t: i64) -> Vec<f64> {
        let (d, h) = (clock.day_of_week(t), clock.hour_of_day(t));
        match self.entries.iter().find(|e| e.day == d && e.hour == h) {
            Some(e) => e.freq.clone(),
            None => {
                log::warn!("no selection history for day {d} hour {h}; using a zero frequency grid");
                vec![0.0; self.rows * self.cols]
            }
        }
    }
}

pub fn build_frequency_matrix(selections: &[SelectionMatrix], clock: &Clock) -> Result<FrequencyMatrix> {
    let first = selections.first().ok_or_else(|| Error::EmptyInput("no selection matrices to average".into()))?;
    let g = first.geometry();
    let mut acc: BTreeMap<(u32, u32), (usize, Vec<f64>)> = BTreeMap::new();
    for s in selections {
        if !s.geometry().same_shape(&g) {
            return Err(Error::Shape("selection matrices of different shapes".into()));
        }
        let e = acc.entry((clock.day_of_week(s.t), clock.hour_of_day(s.t))).or_insert_with(|| (0, vec![0.0; g.cells()]));
        e.0 += 1;
        e.1.iter_mut().zip(s.bits()).for_each(|(f, &b)| *f += b as u8 as f64);
    }
    let entries = acc
        .into_iter()
        .map(|((day, hour), (n, sum))| FrequencyEntry { day, hour, n, freq: sum.into_iter().map(|v| v / n as f64).collect() })
        .collect();
    Ok(FrequencyMatrix { rows: g.rows, cols: g.cols, entries })
}

/// The `round(budget)` most frequently selected cells, ties in row-major order.
pub fn historical_baseline(freq: &FrequencyMatrix, budget: &BudgetTable, clock: &Clock, t: i64) -> SelectionMatrix {
    let mut order = frequency_order(freq, clock, t);
    order.truncate(budget.count(clock, t));
    SelectionMatrix::from_indices(t, freq.geometry(), &order).expect("indices come from the grid")
}

/// Random baseline as an online strategy; each timestamp draws from its own
/// derived seed.
pub struct RandomStrategy {
    pub budget: BudgetTable,
    pub clock: Clock,
    pub seed: u64,
}

impl Selector for RandomStrategy {
    fn select(&self, window: &StateWindow, _: [f64; 3]) -> Result<SelectionMatrix> {
        let t = window.t();
        Ok(random_baseline(&self.budget, window.geometry(), &self.clock, t, derive_seed(self.seed, t as u64)))
    }
}

pub struct HistoricalStrategy {
    pub freq: FrequencyMatrix,
    pub budget: BudgetTable,
    pub clock: Clock,
}

impl Selector for HistoricalStrategy {
    fn select(&self, window: &StateWindow, _: [f64; 3]) -> Result<SelectionMatrix> {
        Ok(historical_baseline(&self.freq, &self.budget, &self.clock, window.t()))
    }
}
