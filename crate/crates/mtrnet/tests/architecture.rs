use rand::Rng;
use spider_core::sampling::rng;
use spider_core::{apply_mask, Error, Grid, GridGeometry, SelectionMatrix, SparseMeasurement, StateWindow, TrafficSnapshot};
use spider_mtrnet::{mae_loss, mtrnet_infer, mtrnet_init, window_input, MtrnetConfig};

fn zero_window(frames: usize, rows: usize, cols: usize) -> StateWindow {
    let g = GridGeometry::new(rows, cols).unwrap();
    StateWindow::new((0..frames).map(|t| SparseMeasurement::empty(t as i64, g)).collect()).unwrap()
}

fn random_window(frames: usize, rows: usize, cols: usize, seed: u64) -> StateWindow {
    let g = GridGeometry::new(rows, cols).unwrap();
    let mut r = rng(seed);
    let frames = (0..frames)
        .map(|t| {
            let truth = TrafficSnapshot::new(t as i64, Grid::from_vec(rows, cols, (0..g.cells()).map(|_| r.gen::<f64>() * 2.0).collect()).unwrap()).unwrap();
            let bits = (0..g.cells()).map(|_| r.gen::<f64>() < 0.4).collect();
            apply_mask(&truth, &SelectionMatrix::from_bits(t as i64, g, bits).unwrap()).unwrap()
        })
        .collect();
    StateWindow::new(frames).unwrap()
}

#[test]
fn architecture_is_seed_independent() {
    let cfg = MtrnetConfig::default();
    let a = mtrnet_init(&cfg, 1).unwrap();
    let b = mtrnet_init(&cfg, 2).unwrap();
    assert_eq!(a.param_count(), b.param_count());
    assert_ne!(a.params.checksum(), b.params.checksum());
    assert_eq!(mtrnet_init(&cfg, 1).unwrap().params.checksum(), a.params.checksum());
}

#[test]
fn output_matches_input_grid() {
    for (frames, rows, cols) in [(7, 20, 20), (7, 9, 13), (2, 5, 4), (4, 1, 1)] {
        let cfg = MtrnetConfig { window_frames: frames, time_kernel: 2, ..MtrnetConfig::desk() };
        let m = mtrnet_init(&cfg, 0).unwrap();
        let out = mtrnet_infer(&m, &random_window(frames, rows, cols, 3)).unwrap();
        let g = out.values.geometry();
        assert_eq!((g.rows, g.cols), (rows, cols));
        assert!(out.values.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()));
    }
}

#[test]
fn ablation_depths_construct() {
    for n in [5, 10, 15, 20, 25, 30] {
        let m = mtrnet_init(&MtrnetConfig { n_feature_layers: n, ..MtrnetConfig::default() }, 0).unwrap();
        let out = mtrnet_infer(&m, &zero_window(7, 6, 6)).unwrap();
        assert!(out.values.all_finite());
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        MtrnetConfig { channels: vec![8, 16, 16], ..Default::default() },
        MtrnetConfig { channels: vec![8, 0, 16, 16], ..Default::default() },
        MtrnetConfig { window_frames: 1, time_kernel: 1, ..Default::default() },
        MtrnetConfig { n_feature_layers: 0, ..Default::default() },
        MtrnetConfig { lrelu_slope: 1.0, ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(mtrnet_init(&cfg, 0), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn inference_sanity_and_determinism() {
    let m = mtrnet_init(&MtrnetConfig::default(), 5).unwrap();
    let z = mtrnet_infer(&m, &zero_window(7, 8, 8)).unwrap();
    assert!(z.values.all_finite());
    let w = random_window(7, 8, 8, 9);
    assert_eq!(mtrnet_infer(&m, &w).unwrap(), mtrnet_infer(&m, &w).unwrap());
    assert!(matches!(mtrnet_infer(&m, &random_window(6, 8, 8, 1)), Err(Error::Shape(_))));
}

#[test]
fn non_finite_input_is_a_domain_error() {
    let m = mtrnet_init(&MtrnetConfig::desk(), 5).unwrap();
    let mut frames = random_window(7, 4, 4, 2).frames().to_vec();
    frames[6].values.set(0, 0, f64::NAN);
    let w = StateWindow::new(frames).unwrap();
    assert!(matches!(mtrnet_infer(&m, &w), Err(Error::Domain(_))));
}

#[test]
fn gradients_match_finite_differences() {
    let cfg = MtrnetConfig { window_frames: 3, time_kernel: 2, channels: vec![2, 3, 3, 4], n_feature_layers: 4, ..MtrnetConfig::default() };
    let mut model = mtrnet_init(&cfg, 11).unwrap();
    let mut r = rng(12);
    // non-zero biases so every bias path carries signal
    for p in model.params.params_mut() {
        if p.name.ends_with("bias") {
            p.value.iter_mut().for_each(|v| *v = r.gen_range(-0.3..0.3));
        }
    }
    let x = window_input(&random_window(3, 4, 4, 13), false);
    let target: Vec<f64> = (0..16).map(|_| r.gen::<f64>() * 2.0 + 1.0).collect();
    let loss = |m: &spider_mtrnet::MtrnetModel| mae_loss(&m.forward(&x).out, &target, None).0;

    let trace = model.forward(&x);
    let (_, dout) = mae_loss(&trace.out, &target, None);
    let mut grads = model.params.zero_grads();
    model.backbone().backward(&model.params, &mut grads, &trace, &dout);

    let sizes: Vec<usize> = model.params.params().iter().map(|p| p.value.len()).collect();
    let total: usize = sizes.iter().sum();
    let h = 1e-6;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut flat = r.gen_range(0..total);
        let mut k = 0;
        while flat >= sizes[k] {
            flat -= sizes[k];
            k += 1;
        }
        let orig = model.params.params()[k].value[flat];
        model.params.params_mut()[k].value[flat] = orig + h;
        let up = loss(&model);
        model.params.params_mut()[k].value[flat] = orig - h;
        let down = loss(&model);
        model.params.params_mut()[k].value[flat] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.bufs()[k][flat];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max(rel);
        assert!(rel < 1e-4, "{} [{flat}]: analytic {analytic:e}, numeric {numeric:e}", model.params.params()[k].name);
        checked += 1;
    }
    assert_eq!(checked, 100);
    eprintln!("worst relative gradient error {worst:e}");
}

#[test]
fn global_skip_is_live() {
    let mut model = mtrnet_init(&MtrnetConfig::desk(), 3).unwrap();
    let x = window_input(&random_window(7, 6, 6, 4), true);
    let t = model.forward(&x);
    assert_ne!(t.stage_out, t.g[0]);
    for name in model.backbone().feature_params() {
        let id = model.params.id(&name).unwrap();
        model.params.get_mut(id).fill(0.0);
    }
    let t = model.forward(&x);
    // with five blocks the staggered skips end on an odd block, so only the
    // global skip carries the projected input through
    assert_eq!(t.stage_out, t.g[0]);
    assert!(t.g[0].data.iter().any(|&v| v != 0.0));
}

#[test]
fn checkpoint_roundtrip_reproduces_outputs() {
    let mut m = mtrnet_init(&MtrnetConfig::desk(), 8).unwrap();
    m.norm = Some(spider_core::NormStats::new(2.5).unwrap());
    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path()).unwrap();
    let back = spider_mtrnet::MtrnetModel::load(dir.path()).unwrap();
    assert_eq!(back.params, m.params);
    assert_eq!(back.norm, m.norm);
    assert_eq!(back.config, m.config);
    let w = random_window(7, 5, 5, 1);
    assert_eq!(mtrnet_infer(&back, &w).unwrap(), mtrnet_infer(&m, &w).unwrap());
}
