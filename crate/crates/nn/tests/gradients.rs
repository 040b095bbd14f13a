//! Every layer's backward pass against central finite differences of
//! the scalar loss `Σ c · y` with fixed random `c`.

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use spider_nn::*;

fn random_act(r: &mut StdRng, c: usize, h: usize, w: usize) -> Act {
    Act::from_vec(c, h, w, (0..c * h * w).map(|_| r.gen_range(-1.0..1.0)).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check(analytic: f64, numeric: f64, what: &str) {
    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
    assert!(rel < 1e-6, "{what}: analytic {analytic} numeric {numeric}");
}

/// Perturbs every parameter and compares to the accumulated gradient.
fn check_params(store: &mut ParamStore, grads: &Grads, loss: &dyn Fn(&ParamStore) -> f64) {
    let h = 1e-6;
    for k in 0..store.len() {
        let id = store.id(&store.params()[k].name.clone()).unwrap();
        for i in 0..store.get(id).len() {
            let orig = store.get(id)[i];
            store.get_mut(id)[i] = orig + h;
            let up = loss(store);
            store.get_mut(id)[i] = orig - h;
            let down = loss(store);
            store.get_mut(id)[i] = orig;
            check(grads.get(id)[i], (up - down) / (2.0 * h), &format!("{} [{i}]", store.params()[k].name));
        }
    }
}

fn check_input(x: &Act, dx: &Act, loss: &dyn Fn(&Act) -> f64) {
    let h = 1e-6;
    for i in 0..x.data.len() {
        let mut up = x.clone();
        up.data[i] += h;
        let mut down = x.clone();
        down.data[i] -= h;
        check(dx.data[i], (loss(&up) - loss(&down)) / (2.0 * h), &format!("input [{i}]"));
    }
}

#[test]
fn conv2d_padded_and_strided() {
    for (k, stride, pad) in [(3, 1, 1), (2, 2, 0), (3, 2, 1)] {
        let mut r = StdRng::seed_from_u64(k as u64 * 10 + stride as u64);
        let mut store = ParamStore::new();
        let conv = Conv2d::new(&mut store, "c", 2, 3, k, stride, pad, 0.2, &mut r);
        // non-zero biases exercise the bias path
        store.get_mut(conv.b).iter_mut().for_each(|b| *b = r.gen_range(-0.5..0.5));
        let x = random_act(&mut r, 2, 5, 4);
        let (y, cols) = conv.forward(&store, &x);
        let c: Vec<f64> = (0..y.data.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let dy = Act::from_vec(y.c, y.h, y.w, c.clone());
        let mut grads = store.zero_grads();
        let dx = conv.backward(&store, &mut grads, (x.h, x.w), &cols, &dy, true).unwrap();
        check_params(&mut store, &grads, &|s| dot(&conv.forward(s, &x).0.data, &c));
        let frozen = store.clone();
        check_input(&x, &dx, &|xx| dot(&conv.forward(&frozen, xx).0.data, &c));
    }
}

#[test]
fn conv3d_over_time() {
    let mut r = StdRng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let conv = Conv3dTime::new(&mut store, "c3", 1, 2, 3, 3, 0.2, &mut r);
    let x = random_act(&mut r, 5, 4, 3);
    let (y, cols) = conv.forward(&store, &x);
    assert_eq!((y.c, y.h, y.w), (2 * 3, 4, 3));
    let c: Vec<f64> = (0..y.data.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut grads = store.zero_grads();
    conv.backward(&mut grads, &cols, &Act::from_vec(y.c, y.h, y.w, c.clone()));
    check_params(&mut store, &grads, &|s| dot(&conv.forward(s, &x).0.data, &c));
}

#[test]
fn conv3d_matches_direct_sum() {
    let mut r = StdRng::seed_from_u64(4);
    let mut store = ParamStore::new();
    let conv = Conv3dTime::new(&mut store, "c3", 1, 2, 2, 3, 0.2, &mut r);
    let x = random_act(&mut r, 3, 3, 3);
    let (y, _) = conv.forward(&store, &x);
    let w = store.get(conv.w);
    // channel c*T' + t', position (1, 0)
    for co in 0..2 {
        for t in 0..2 {
            let mut want = 0.0;
            for dt in 0..2 {
                for ki in 0..3 {
                    for kj in 0..3 {
                        let (iy, ix) = (1 + ki as isize - 1, kj as isize - 1);
                        if (0..3).contains(&iy) && (0..3).contains(&ix) {
                            want += w[((co * 2 + dt) * 3 + ki) * 3 + kj] * x.data[((t + dt) * 3 + iy as usize) * 3 + ix as usize];
                        }
                    }
                }
            }
            let got = y.data[((co * 2 + t) * 3 + 1) * 3];
            assert!((got - want).abs() < 1e-12);
        }
    }
}

#[test]
fn conv3d_with_two_input_channels() {
    let mut r = StdRng::seed_from_u64(8);
    let mut store = ParamStore::new();
    let conv = Conv3dTime::new(&mut store, "c3", 2, 3, 2, 3, 0.2, &mut r);
    // two input channels of 4 frames each
    let x = random_act(&mut r, 8, 3, 4);
    let (y, cols) = conv.forward(&store, &x);
    assert_eq!((y.c, y.h, y.w), (3 * 3, 3, 4));
    let w = store.get(conv.w).to_vec();
    let b = store.get(conv.b).to_vec();
    for co in 0..3 {
        for t in 0..3 {
            for oy in 0..3isize {
                for ox in 0..4isize {
                    let mut want = b[co];
                    for ci in 0..2 {
                        for dt in 0..2 {
                            for ki in 0..3isize {
                                for kj in 0..3isize {
                                    let (iy, ix) = (oy + ki - 1, ox + kj - 1);
                                    if (0..3).contains(&iy) && (0..4).contains(&ix) {
                                        let wi = (((co * 2 + ci) * 2 + dt) * 3 + ki as usize) * 3 + kj as usize;
                                        want += w[wi] * x.data[((ci * 4 + t + dt) * 3 + iy as usize) * 4 + ix as usize];
                                    }
                                }
                            }
                        }
                    }
                    let got = y.data[((co * 3 + t) * 3 + oy as usize) * 4 + ox as usize];
                    assert!((got - want).abs() < 1e-12);
                }
            }
        }
    }
    let c: Vec<f64> = (0..y.data.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut grads = store.zero_grads();
    conv.backward(&mut grads, &cols, &Act::from_vec(y.c, y.h, y.w, c.clone()));
    check_params(&mut store, &grads, &|s| dot(&conv.forward(s, &x).0.data, &c));
}

#[test]
fn upsample_with_crop() {
    let mut r = StdRng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let up = Upsample::new(&mut store, "up", 3, 2, 2, 0.2, &mut r);
    store.get_mut(up.b).iter_mut().for_each(|b| *b = r.gen_range(-0.5..0.5));
    let x = random_act(&mut r, 3, 3, 2);
    let y = up.forward(&store, &x, 5, 4);
    let c: Vec<f64> = (0..y.data.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut grads = store.zero_grads();
    let dx = up.backward(&store, &mut grads, &x, &Act::from_vec(y.c, y.h, y.w, c.clone()));
    check_params(&mut store, &grads, &|s| dot(&up.forward(s, &x, 5, 4).data, &c));
    let frozen = store.clone();
    check_input(&x, &dx, &|xx| dot(&up.forward(&frozen, xx, 5, 4).data, &c));
}

#[test]
fn pooling_and_its_adjoint() {
    let mut r = StdRng::seed_from_u64(6);
    let x = random_act(&mut r, 2, 5, 3);
    let y = sum_pool(&x, 2);
    assert_eq!((y.h, y.w), (3, 2));
    assert!((y.data.iter().sum::<f64>() - x.data.iter().sum::<f64>()).abs() < 1e-12);
    let dy = random_act(&mut r, 2, 3, 2);
    let dx = sum_pool_backward(&dy, 2, 5, 3);
    // <pool(x), dy> = <x, pool^T(dy)>
    assert!((dot(&y.data, &dy.data) - dot(&x.data, &dx.data)).abs() < 1e-12);
}

#[test]
fn linear_layer() {
    let mut r = StdRng::seed_from_u64(7);
    let mut store = ParamStore::new();
    let lin = Linear::new(&mut store, "fc", 4, 3, 0.2, &mut r);
    let x: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut grads = store.zero_grads();
    let dx = lin.backward(&store, &mut grads, &x, &c);
    check_params(&mut store, &grads, &|s| dot(&lin.forward(s, &x), &c));
    let h = 1e-6;
    for i in 0..4 {
        let mut up = x.clone();
        up[i] += h;
        let mut down = x.clone();
        down[i] -= h;
        check(dx[i], (dot(&lin.forward(&store, &up), &c) - dot(&lin.forward(&store, &down), &c)) / (2.0 * h), "fc input");
    }
}

#[test]
fn leaky_relu_backward_uses_output_sign() {
    let mut a = Act::from_vec(1, 1, 3, vec![-2.0, 0.5, 3.0]);
    lrelu(&mut a, 0.2);
    assert_eq!(a.data, vec![-0.4, 0.5, 3.0]);
    let mut g = Act::from_vec(1, 1, 3, vec![1.0; 3]);
    lrelu_backward(&a, &mut g, 0.2);
    assert_eq!(g.data, vec![0.2, 1.0, 1.0]);
    assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
}
