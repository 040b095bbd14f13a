use proptest::prelude::*;
use spider_bench::*;
use spider_core::data::{fit_normalizer, synthesize_traffic, DatasetSeries, SyntheticConfig};
use spider_core::{Clock, GridGeometry, Reconstructor, Result, SelectionMatrix, StateWindow, TrafficSnapshot};
use spider_recon::KnnS;

struct Perfect(DatasetSeries);

impl Reconstructor for Perfect {
    fn reconstruct(&self, w: &StateWindow) -> Result<TrafficSnapshot> {
        Ok(self.0.get(w.t())?.clone())
    }
}

fn geo(n: usize) -> GridGeometry {
    GridGeometry::new(n, n).unwrap()
}

fn normalized(cfg: SyntheticConfig) -> DatasetSeries {
    let s = synthesize_traffic(&cfg).unwrap();
    s.normalized(&fit_normalizer(&s).unwrap()).unwrap()
}

fn small() -> DatasetSeries {
    normalized(SyntheticConfig { geometry: geo(6), days: 1, delta_minutes: 120, ..Default::default() })
}

fn table(count: f64) -> BudgetTable {
    let entries = (0..7).flat_map(|day| (0..24).map(move |hour| BudgetEntry { day, hour, count, unreachable: false })).collect();
    BudgetTable { cells: 36, entries }
}

#[test]
fn oracle_reconstructor_needs_one_cell() {
    let s = small();
    let b = build_budget_table(&s, &Perfect(s.clone()), 0.05, 1).unwrap();
    assert!(!b.entries.is_empty());
    assert!(b.entries.iter().all(|e| e.count == 1.0 && !e.unreachable));
}

#[test]
fn infinite_threshold_needs_nothing() {
    let s = small();
    let b = build_budget_table(&s, &KnnS::default(), f64::INFINITY, 1).unwrap();
    assert!(b.entries.iter().all(|e| e.count == 0.0));
}

#[test]
fn unreachable_threshold_takes_every_cell_with_a_flag() {
    let s = small();
    let b = random_budget(&s, &KnnS::default(), &s.timestamps().collect::<Vec<_>>(), 0.0, 4, 1).unwrap();
    assert_eq!(b, Budget { count: 36.0, unreachable: true });
}

#[test]
fn budget_search_is_seeded() {
    let s = small();
    let ts: Vec<i64> = s.timestamps().collect();
    let a = random_budget(&s, &KnnS::default(), &ts, 0.2, 8, 3).unwrap();
    let b = random_budget(&s, &KnnS::default(), &ts, 0.2, 8, 3).unwrap();
    assert_eq!(a, b);
    assert!(a.count >= 1.0 && a.count <= 36.0);
}

#[test]
fn noisier_peak_hours_need_more_cells() {
    let cfg = SyntheticConfig { geometry: geo(10), days: 2, delta_minutes: 60, noise_std: 0.2, peak_noise_boost: 12.0, ..Default::default() };
    let s = normalized(cfg);
    let clock = s.clock();
    let buckets = spider_core::BucketConfig::default();
    let b = build_budget_table(&s, &KnnS::default(), 0.12, 5).unwrap();
    let mean = |peak: bool| {
        let v: Vec<f64> = b
            .entries
            .iter()
            .filter(|e| {
                let t = s.timestamps().find(|&t| clock.day_of_week(t) == e.day && clock.hour_of_day(t) == e.hour).unwrap();
                buckets.is_peak(&clock, t) == peak
            })
            .map(|e| e.count)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) >= mean(false), "peak {} off-peak {}", mean(true), mean(false));
}

#[test]
fn random_baseline_examples() {
    let clock = Clock::new(60);
    let a = random_baseline(&table(5.0), geo(6), &clock, 10, 42);
    assert_eq!(a.count_ones(), 5);
    assert_eq!(a, random_baseline(&table(5.0), geo(6), &clock, 10, 42));
    assert_eq!(random_baseline(&table(0.0), geo(6), &clock, 10, 42).count_ones(), 0);
    assert_eq!(random_baseline(&table(4.6), geo(6), &clock, 10, 1).count_ones(), 5);
    assert_eq!(random_baseline(&table(99.0), geo(6), &clock, 10, 1).count_ones(), 36);
}

#[test]
fn missing_budget_slot_falls_back_to_the_same_hour() {
    let clock = Clock::new(60);
    let t = 5;
    let mut b = table(3.0);
    b.entries.retain(|e| !(e.day == clock.day_of_week(t) && e.hour == clock.hour_of_day(t)));
    b.entries.iter_mut().filter(|e| e.hour == clock.hour_of_day(t)).for_each(|e| e.count = 7.0);
    assert_eq!(b.count(&clock, t), 7);
}

fn sel(t: i64, idx: &[usize]) -> SelectionMatrix {
    SelectionMatrix::from_indices(t, geo(2), idx).unwrap()
}

#[test]
fn frequency_examples() {
    let clock = Clock::new(60);
    let one = build_frequency_matrix(&[sel(0, &[1, 2])], &clock).unwrap();
    assert_eq!(one.lookup(&clock, 0), vec![0.0, 1.0, 1.0, 0.0]);
    // one week later lands in the same slot
    let week = 7 * 24;
    let two = build_frequency_matrix(&[sel(0, &[0, 1]), sel(week, &[2, 3])], &clock).unwrap();
    assert_eq!(two.lookup(&clock, 0), vec![0.5; 4]);
    assert_eq!(two.lookup(&clock, 1), vec![0.0; 4]);
}

#[test]
fn historical_examples() {
    let clock = Clock::new(60);
    let g = geo(3);
    let freq = |f: Vec<f64>| FrequencyMatrix { rows: 3, cols: 3, entries: vec![FrequencyEntry { day: clock.day_of_week(0), hour: 0, n: 1, freq: f }] };
    let mut tb = table(9.0);
    tb.cells = 9;
    assert_eq!(historical_baseline(&freq(vec![0.1; 9]), &tb, &clock, 0).count_ones(), 9);
    let mut f = vec![0.2; 9];
    f[7] = 0.9;
    let mut one = table(1.0);
    one.cells = 9;
    assert_eq!(historical_baseline(&freq(f), &one, &clock, 0).indices(), vec![7]);
    let mut three = table(3.0);
    three.cells = 9;
    assert_eq!(historical_baseline(&freq(vec![0.5; 9]), &three, &clock, 0).indices(), vec![0, 1, 2]);
    assert_eq!(historical_baseline(&freq(vec![0.5; 9]), &three, &clock, 0).geometry(), g);
}

#[test]
fn historical_budget_with_an_oracle_is_one_cell() {
    let s = small();
    let clock = s.clock();
    let sels: Vec<SelectionMatrix> = s.timestamps().map(|t| SelectionMatrix::from_indices(t, geo(6), &[0, 1]).unwrap()).collect();
    let freq = build_frequency_matrix(&sels, &clock).unwrap();
    let b = build_historical_budget(&s, &Perfect(s.clone()), &freq, 0.05).unwrap();
    assert!(b.entries.iter().all(|e| e.count == 1.0));
}

proptest! {
    #[test]
    fn frequencies_stay_in_unit_interval(picks in proptest::collection::vec(proptest::collection::vec(0usize..9, 0..9), 1..12)) {
        let clock = Clock::new(60);
        let sels: Vec<SelectionMatrix> = picks.iter().enumerate().map(|(i, p)| SelectionMatrix::from_indices((i % 3) as i64, geo(3), p).unwrap()).collect();
        let f = build_frequency_matrix(&sels, &clock).unwrap();
        for e in &f.entries {
            prop_assert!(e.freq.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn baselines_emit_exactly_the_budget(count in 0usize..=36, seed in any::<u64>()) {
        let clock = Clock::new(60);
        let b = table(count as f64);
        prop_assert_eq!(random_baseline(&b, geo(6), &clock, 3, seed).count_ones(), count);
        let freq = FrequencyMatrix { rows: 6, cols: 6, entries: vec![] };
        prop_assert_eq!(historical_baseline(&freq, &b, &clock, 3).count_ones(), count);
    }
}
