use rand::SeedableRng;
use rand::rngs::StdRng;
use spider_nn::ParamStore;

#[test]
fn roundtrip_is_bit_exact() {
    let mut r = StdRng::seed_from_u64(1);
    let mut store = ParamStore::new();
    store.add_weight("a.weight", &[3, 2, 3, 3], 18, 0.2, &mut r);
    store.add_zeros("a.bias", &[3]);
    store.add_weight("fc", &[4, 5], 5, 0.0, &mut r);
    let dir = tempfile::tempdir().unwrap();
    store.save(dir.path()).unwrap();
    let back = ParamStore::load(dir.path()).unwrap();
    assert_eq!(back, store);
    assert_eq!(back.checksum(), store.checksum());
    store.check_layout(&back).unwrap();
}

#[test]
fn layout_mismatch_is_reported() {
    let mut a = ParamStore::new();
    a.add_zeros("x", &[2]);
    let mut b = ParamStore::new();
    b.add_zeros("x", &[3]);
    assert!(a.check_layout(&b).is_err());
}

#[test]
fn same_seed_same_init() {
    let build = || {
        let mut r = StdRng::seed_from_u64(9);
        let mut s = ParamStore::new();
        s.add_weight("w", &[10], 3, 0.2, &mut r);
        s
    };
    assert_eq!(build().checksum(), build().checksum());
}
