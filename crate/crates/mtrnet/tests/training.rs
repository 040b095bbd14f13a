use spider_core::data::{synthesize_traffic, SyntheticConfig};
use spider_core::{Error, GridGeometry};
use spider_mtrnet::{mtrnet_init, mtrnet_train, MtrnetConfig, TrainHyper};

fn small_series(days: usize) -> spider_core::data::DatasetSeries {
    let cfg = SyntheticConfig { geometry: GridGeometry::new(8, 8).unwrap(), days, delta_minutes: 30, noise_std: 0.3, n_hotspots: 3, ..Default::default() };
    synthesize_traffic(&cfg).unwrap()
}

fn tiny() -> MtrnetConfig {
    MtrnetConfig { channels: vec![4, 8, 8, 8], n_feature_layers: 2, ..MtrnetConfig::default() }
}

fn hyper(epochs: usize) -> TrainHyper {
    TrainHyper { epochs, batch_size: 8, learning_rate: 3e-3, samples_per_epoch: Some(48), seed: 4, ..TrainHyper::default() }
}

#[test]
fn one_epoch_gives_one_entry() {
    let s = small_series(2);
    let mut m = mtrnet_init(&tiny(), 0).unwrap();
    let h = mtrnet_train(&mut m, &s, &hyper(1)).unwrap();
    assert_eq!(h.epochs.len(), 1);
    assert!(h.epochs[0].train_mae.is_finite() && h.epochs[0].val_mae.is_finite());
    assert!(m.norm.is_some());
}

#[test]
fn loss_halves_and_validation_never_worsens() {
    let s = small_series(3);
    let mut m = mtrnet_init(&tiny(), 1).unwrap();
    let h = mtrnet_train(&mut m, &s, &hyper(20)).unwrap();
    let first = h.epochs[0].train_mae;
    let last = h.epochs.last().unwrap().train_mae;
    assert!(last < 0.5 * first, "epoch 1 {first}, epoch 20 {last}");
    assert!(h.final_val_mae() <= h.initial_val_mae);
}

#[test]
fn training_is_seed_deterministic() {
    let s = small_series(2);
    let run = || {
        let mut m = mtrnet_init(&tiny(), 2).unwrap();
        let h = mtrnet_train(&mut m, &s, &hyper(3)).unwrap();
        (h, m.params.checksum())
    };
    let (a, ca) = run();
    let (b, cb) = run();
    assert_eq!(a, b);
    assert_eq!(ca, cb);
}

#[test]
fn short_series_is_a_range_error() {
    let s = small_series(1);
    let short = s.slice(0..3).unwrap();
    let mut m = mtrnet_init(&tiny(), 0).unwrap();
    assert!(matches!(mtrnet_train(&mut m, &short, &hyper(1)), Err(Error::Range(_))));
}

#[test]
fn bad_mask_range_is_rejected() {
    let s = small_series(1);
    let mut m = mtrnet_init(&tiny(), 0).unwrap();
    let h = TrainHyper { mask_rate_range: (0.5, 0.2), ..hyper(1) };
    assert!(matches!(mtrnet_train(&mut m, &s, &h), Err(Error::Config(_))));
}
