use proptest::prelude::*;
use spider_agent::SelectionSample;
use spider_core::data::{fit_normalizer, synthesize_traffic, DatasetSeries, SyntheticConfig};
use spider_core::{Bucket, BucketConfig, Error, GridGeometry, Result, SelectionMatrix, SparseMeasurement, StateWindow};
use spider_mtrnet::{mtrnet_init, MtrnetConfig};
use spider_policy::*;
use spider_recon::KnnS;

fn tiny_config(frames: usize) -> PolicyConfig {
    PolicyConfig { net: MtrnetConfig { window_frames: frames, n_feature_layers: 2, channels: vec![3, 6, 6, 6], mask_input: true, ..MtrnetConfig::default() }, threshold: 0.5, seed: 1 }
}

fn empty_window(g: GridGeometry, t: i64, frames: usize) -> StateWindow {
    StateWindow::new((0..frames as i64).map(|k| SparseMeasurement::empty(t - frames as i64 + 1 + k, g)).collect()).unwrap()
}

#[test]
fn binarization_examples() {
    assert_eq!(binarize(&[0.2, 0.8], 0.5), vec![false, true]);
    assert_eq!(binarize(&[0.1, 0.5, 0.9], 0.5), vec![false, false, true]);
    assert_eq!(binarize(&[0.3; 6], 0.5), vec![false; 6]);
    assert_eq!(binarize(&[0.3, f64::NAN], 0.5), vec![false; 2]);
}

proptest! {
    #[test]
    fn binarization_ignores_affine_rescaling(probs in prop::collection::vec(0.0f64..1.0, 2..40), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi - lo > 1e-6);
        // skip grids with a value sitting on the threshold up to rounding
        prop_assume!(probs.iter().all(|p| ((p - lo) / (hi - lo) - 0.5).abs() > 1e-9));
        let moved: Vec<f64> = probs.iter().map(|p| p * scale + shift).collect();
        prop_assert_eq!(binarize(&probs, 0.5), binarize(&moved, 0.5));
    }
}

#[test]
fn bce_reference_values() {
    let labels = [true, false, false, true, true];
    let perfect: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
    assert!(bce(&perfect, &labels) < 1e-6);
    assert!((bce(&[0.5; 5], &labels) - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn prediction_contract() {
    let g = GridGeometry::new(6, 5).unwrap();
    let net = PolicyNet::new(tiny_config(3)).unwrap();
    let (sel, probs) = policy_predict(&net, &empty_window(g, 10, 3), [0.1, -0.2, 0.3]).unwrap();
    assert_eq!(sel.t, 10);
    assert!(sel.count_ones() <= 30);
    assert!(probs.as_slice().iter().all(|p| (0.0..=1.0).contains(p)));
    assert_eq!(sel.bits(), binarize(probs.as_slice(), 0.5).as_slice());
    assert!(matches!(policy_predict(&net, &empty_window(g, 10, 4), [0.0; 3]), Err(Error::Shape(_))));
    assert!(PolicyNet::new(PolicyConfig { threshold: 1.0, ..tiny_config(3) }).is_err());
}

fn toy_dataset(g: GridGeometry, n: usize) -> Vec<SelectionSample> {
    // label: the diagonal, whatever the input
    let label: Vec<usize> = (0..g.rows.min(g.cols)).map(|i| g.index(i, i)).collect();
    (0..n as i64)
        .map(|k| {
            let mut w = empty_window(g, 10 + k, 3);
            let f = w.frames()[0].reveal((k as usize * 7) % g.cells(), 1.0 + k as f64 / 10.0);
            let mut frames = w.frames().to_vec();
            frames[0] = f;
            w = StateWindow::new(frames).unwrap();
            SelectionSample { window: w, label: SelectionMatrix::from_indices(10 + k, g, &label).unwrap(), time_features: [k as f64 / n as f64, 0.0, 0.0] }
        })
        .collect()
}

#[test]
fn training_lowers_bce_and_is_deterministic() {
    let g = GridGeometry::new(6, 6).unwrap();
    let data = toy_dataset(g, 8);
    let hyper = PolicyHyper { learning_rate: 1e-2, batch_size: 4, epochs: 30, seed: 2 };
    let mut a = PolicyNet::new(tiny_config(3)).unwrap();
    let ha = policy_train(&mut a, &data, &hyper).unwrap();
    assert_eq!(ha.epoch_bce.len(), 30);
    assert!(ha.epoch_bce[29] < 0.5 * ha.epoch_bce[0], "{:?}", ha.epoch_bce);
    let mut b = PolicyNet::new(tiny_config(3)).unwrap();
    assert_eq!(policy_train(&mut b, &data, &hyper).unwrap(), ha);
    assert_eq!(a.params, b.params);
    let (sel, _) = policy_predict(&a, &data[0].window, data[0].time_features).unwrap();
    assert_eq!(sel.bits(), data[0].label.bits());
    assert!(matches!(policy_train(&mut b, &[], &hyper), Err(Error::EmptyInput(_))));
}

#[test]
fn checkpoint_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let net = PolicyNet::new(tiny_config(4)).unwrap();
    net.save(dir.path()).unwrap();
    let back = PolicyNet::load(dir.path()).unwrap();
    assert_eq!(back.config, net.config);
    assert_eq!(back.params, net.params);
}

struct All;
impl Selector for All {
    fn select(&self, w: &StateWindow, _: [f64; 3]) -> Result<SelectionMatrix> {
        Ok(SelectionMatrix::full(w.t(), w.geometry()))
    }
}

struct Nothing;
impl Selector for Nothing {
    fn select(&self, w: &StateWindow, _: [f64; 3]) -> Result<SelectionMatrix> {
        Ok(SelectionMatrix::empty(w.t(), w.geometry()))
    }
}

fn test_series() -> DatasetSeries {
    let cfg = SyntheticConfig { geometry: GridGeometry::new(6, 6).unwrap(), days: 2, delta_minutes: 240, ..Default::default() };
    let s = synthesize_traffic(&cfg).unwrap();
    let n = fit_normalizer(&s).unwrap();
    s.normalized(&n).unwrap()
}

#[test]
fn full_observation_is_exact() {
    let truth = test_series();
    let report = evaluate_selector(&All, &truth, &KnnS::default(), 3, &BucketConfig::default()).unwrap();
    assert_eq!(report.records.len(), truth.len());
    assert!(report.records.iter().all(|r| r.count == 36 && r.nmae < 1e-12));
    assert_eq!(report.buckets.len(), 6);
    let overall = report.bucket(Bucket::Overall);
    assert_eq!(overall.n, truth.len());
    assert_eq!(overall.mean_count, Some(36.0));
    // 2 days from a Monday: no weekend, no holidays configured
    assert_eq!(report.bucket(Bucket::Weekend).n, 0);
    assert_eq!(report.bucket(Bucket::Weekend).mean_nmae, None);
    let peak = report.bucket(Bucket::Peak).n;
    assert_eq!(peak + report.bucket(Bucket::OffPeak).n, truth.len());
    assert_eq!(report.bucket(Bucket::Weekdays).n, truth.len());
}

#[test]
fn empty_selection_falls_back_to_history() {
    let truth = test_series();
    let model = mtrnet_init(&MtrnetConfig { window_frames: 3, n_feature_layers: 1, channels: vec![2, 4, 4, 4], ..MtrnetConfig::default() }, 0).unwrap();
    let report = evaluate_selector(&Nothing, &truth, &model, 3, &BucketConfig::default()).unwrap();
    assert!(report.records.iter().all(|r| r.count == 0 && r.nmae.is_finite() && r.nmae >= 0.0));
}

#[test]
fn policy_evaluation_runs_online() {
    let truth = test_series();
    let net = PolicyNet::new(tiny_config(3)).unwrap();
    let report = policy_evaluate(&net, &truth, &KnnS::default(), &BucketConfig::default());
    // an untrained net may select nothing, which KNN cannot fill
    match report {
        Ok(r) => assert!(r.records.iter().all(|x| x.count <= 36 && x.latency_s >= 0.0)),
        Err(e) => assert!(matches!(e, Error::InsufficientData(_)), "{e}"),
    }
}
