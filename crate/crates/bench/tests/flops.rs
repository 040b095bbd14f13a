use proptest::prelude::*;
use spider_bench::{count_flops, layer_flops, linear_fit};
use spider_mtrnet::MtrnetConfig;
use spider_nn::LayerDesc;

#[test]
fn empty_model_costs_nothing() {
    assert_eq!(count_flops(&[]).unwrap(), 0);
}

#[test]
fn single_padded_conv() {
    let conv = LayerDesc::new("conv2d", 1, 1, vec![3, 3], 16);
    assert_eq!(count_flops(&[conv]).unwrap(), 2 * 16 * 9);
}

#[test]
fn elementwise_and_pooling_rules() {
    assert_eq!(layer_flops(&LayerDesc::new("lrelu", 4, 4, vec![], 64)).unwrap(), 64);
    assert_eq!(layer_flops(&LayerDesc::new("sum_pool", 4, 4, vec![2, 2], 16)).unwrap(), 16 * 3);
    assert_eq!(layer_flops(&LayerDesc::new("linear", 10, 3, vec![1], 3)).unwrap(), 2 * 3 * 10);
}

#[test]
fn unknown_layer_is_an_accounting_error() {
    let err = count_flops(&[LayerDesc::new("attention", 1, 1, vec![1], 1)]).unwrap_err();
    assert!(matches!(err, spider_core::Error::Accounting(_)));
}

#[test]
fn mtrnet_flops_grow_linearly_with_depth() {
    let points: Vec<(f64, f64)> = (1..=8)
        .map(|n| {
            let cfg = MtrnetConfig { n_feature_layers: n, ..MtrnetConfig::desk() };
            let model = spider_mtrnet::mtrnet_init(&cfg, 0).unwrap();
            (n as f64, count_flops(&model.layer_descs(20, 20)).unwrap() as f64)
        })
        .collect();
    assert!(points.windows(2).all(|w| w[1].1 > w[0].1));
    let (slope, _, r2) = linear_fit(&points);
    assert!(slope > 0.0);
    assert!(r2 > 0.99, "R² {r2}");
}

proptest! {
    #[test]
    fn conv_cost_scales_with_each_factor(cin in 1usize..8, out in 1usize..100, k in 1usize..5) {
        let one = layer_flops(&LayerDesc::new("conv2d", cin, 1, vec![k, k], out)).unwrap();
        prop_assert_eq!(one, (2 * out * k * k * cin) as u64);
        let twice = layer_flops(&LayerDesc::new("conv2d", 2 * cin, 1, vec![k, k], out)).unwrap();
        prop_assert_eq!(twice, 2 * one);
    }
}
