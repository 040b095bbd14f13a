//! Layers with explicit forward/backward passes over single samples.
//!
//! Forward passes return whatever the backward pass needs (im2col buffers);
//! callers keep activations and feed them back in.

use rand::Rng;

use crate::act::Act;
use crate::desc::LayerDesc;
use crate::gemm::gemm;
use crate::params::{Grads, ParamId, ParamStore};

pub fn lrelu(x: &mut Act, slope: f64) {
    x.data.iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v *= slope;
        }
    });
}

/// Backward through a leaky ReLU given its output (sign is preserved for
/// positive slopes).
pub fn lrelu_backward(out: &Act, dy: &mut Act, slope: f64) {
    dy.data.iter_mut().zip(&out.data).for_each(|(g, &o)| {
        if o < 0.0 {
            *g *= slope;
        }
    });
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Output extent of a window of size `k` sliding with `stride` over `n + 2·pad`.
pub fn conv_out(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad).saturating_sub(k) / stride + 1
}

/// 2D convolution with square kernel, stride and zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: ParamId,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, slope: f64, rng: &mut R) -> Self {
        let w = store.add_weight(&format!("{name}.weight"), &[cout, cin, k, k], cin * k * k, slope, rng);
        let b = store.add_zeros(&format!("{name}.bias"), &[cout]);
        Self { w, b, cin, cout, k, stride, pad }
    }

    /// "Same" 3×3-style convolution: odd kernel, stride 1.
    pub fn same<R: Rng>(store: &mut ParamStore, name: &str, cin: usize, cout: usize, k: usize, slope: f64, rng: &mut R) -> Self {
        Self::new(store, name, cin, cout, k, 1, k / 2, slope, rng)
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (conv_out(h, self.k, self.stride, self.pad), conv_out(w, self.k, self.stride, self.pad))
    }

    fn im2col(&self, x: &Act, oh: usize, ow: usize) -> Vec<f64> {
        let (k, s, pad) = (self.k, self.stride, self.pad as isize);
        let p = oh * ow;
        let mut cols = vec![0.0; self.cin * k * k * p];
        for ci in 0..self.cin {
            let xc = x.channel(ci);
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut cols[((ci * k + ki) * k + kj) * p..][..p];
                    for oy in 0..oh {
                        let iy = (oy * s + ki) as isize - pad;
                        if iy < 0 || iy >= x.h as isize {
                            continue;
                        }
                        let src = &xc[iy as usize * x.w..][..x.w];
                        for ox in 0..ow {
                            let ix = (ox * s + kj) as isize - pad;
                            if ix >= 0 && ix < x.w as isize {
                                row[oy * ow + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Act {
        let (k, s, pad) = (self.k, self.stride, self.pad as isize);
        let p = oh * ow;
        let mut dx = Act::zeros(self.cin, h, w);
        for ci in 0..self.cin {
            for ki in 0..k {
                for kj in 0..k {
                    let row = &cols[((ci * k + ki) * k + kj) * p..][..p];
                    for oy in 0..oh {
                        let iy = (oy * s + ki) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = (ci * h + iy as usize) * w;
                        for ox in 0..ow {
                            let ix = (ox * s + kj) as isize - pad;
                            if ix >= 0 && ix < w as isize {
                                dx.data[base + ix as usize] += row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn forward(&self, store: &ParamStore, x: &Act) -> (Act, Vec<f64>) {
        assert_eq!(x.c, self.cin, "conv input channels");
        let (oh, ow) = self.out_dims(x.h, x.w);
        let cols = self.im2col(x, oh, ow);
        let p = oh * ow;
        let mut y = Act::zeros(self.cout, oh, ow);
        gemm(self.cout, self.cin * self.k * self.k, p, store.get(self.w), false, &cols, false, &mut y.data, false);
        let b = store.get(self.b);
        for co in 0..self.cout {
            y.data[co * p..(co + 1) * p].iter_mut().for_each(|v| *v += b[co]);
        }
        (y, cols)
    }

    /// Accumulates parameter gradients; returns the input gradient if asked.
    pub fn backward(&self, store: &ParamStore, grads: &mut Grads, x_dims: (usize, usize), cols: &[f64], dy: &Act, need_dx: bool) -> Option<Act> {
        let (oh, ow) = (dy.h, dy.w);
        let p = oh * ow;
        let kk = self.cin * self.k * self.k;
        gemm(self.cout, p, kk, &dy.data, false, cols, true, grads.get_mut(self.w), true);
        let db = grads.get_mut(self.b);
        for co in 0..self.cout {
            db[co] += dy.data[co * p..(co + 1) * p].iter().sum::<f64>();
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![0.0; kk * p];
        gemm(kk, self.cout, p, store.get(self.w), true, &dy.data, false, &mut dcols, false);
        Some(self.col2im(&dcols, x_dims.0, x_dims.1, oh, ow))
    }

    pub fn desc(&self, oh: usize, ow: usize) -> LayerDesc {
        LayerDesc::new("conv2d", self.cin, self.cout, vec![self.k, self.k], self.cout * oh * ow)
    }
}

/// 3D convolution over a `(cin, T, H, W)` volume stored as `cin · T`
/// channels (`ci · T + t`): valid in time, "same" in space. Output channels
/// are laid out `c · T' + t'`.
#[derive(Debug, Clone)]
pub struct Conv3dTime {
    pub w: ParamId,
    pub b: ParamId,
    pub cin: usize,
    pub cout: usize,
    pub kt: usize,
    pub k: usize,
}

impl Conv3dTime {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, cin: usize, cout: usize, kt: usize, k: usize, slope: f64, rng: &mut R) -> Self {
        let w = store.add_weight(&format!("{name}.weight"), &[cout, cin, kt, k, k], cin * kt * k * k, slope, rng);
        let b = store.add_zeros(&format!("{name}.bias"), &[cout]);
        Self { w, b, cin, cout, kt, k }
    }

    pub fn out_frames(&self, frames: usize) -> usize {
        frames + 1 - self.kt
    }

    fn kvol(&self) -> usize {
        self.cin * self.kt * self.k * self.k
    }

    fn im2col(&self, x: &Act) -> Vec<f64> {
        let (kt, k, pad) = (self.kt, self.k, (self.k / 2) as isize);
        let frames = x.c / self.cin;
        let tp = self.out_frames(frames);
        let plane = x.plane();
        let p = tp * plane;
        let mut cols = vec![0.0; self.kvol() * p];
        for ci in 0..self.cin {
            for dt in 0..kt {
                for ki in 0..k {
                    for kj in 0..k {
                        let row = &mut cols[(((ci * kt + dt) * k + ki) * k + kj) * p..][..p];
                        for t in 0..tp {
                            let src = x.channel(ci * frames + t + dt);
                            for oy in 0..x.h {
                                let iy = oy as isize + ki as isize - pad;
                                if iy < 0 || iy >= x.h as isize {
                                    continue;
                                }
                                for ox in 0..x.w {
                                    let ix = ox as isize + kj as isize - pad;
                                    if ix >= 0 && ix < x.w as isize {
                                        row[t * plane + oy * x.w + ox] = src[iy as usize * x.w + ix as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&self, store: &ParamStore, x: &Act) -> (Act, Vec<f64>) {
        assert_eq!(x.c % self.cin, 0, "channel count is not a multiple of the input channels");
        let frames = x.c / self.cin;
        assert!(frames >= self.kt, "fewer frames than the temporal kernel");
        let tp = self.out_frames(frames);
        let cols = self.im2col(x);
        let p = tp * x.plane();
        let mut y = Act::zeros(self.cout * tp, x.h, x.w);
        gemm(self.cout, self.kvol(), p, store.get(self.w), false, &cols, false, &mut y.data, false);
        let b = store.get(self.b);
        for co in 0..self.cout {
            y.data[co * p..(co + 1) * p].iter_mut().for_each(|v| *v += b[co]);
        }
        (y, cols)
    }

    /// Parameter gradients only; the input is data.
    pub fn backward(&self, grads: &mut Grads, cols: &[f64], dy: &Act) {
        let p = dy.data.len() / self.cout;
        gemm(self.cout, p, self.kvol(), &dy.data, false, cols, true, grads.get_mut(self.w), true);
        let db = grads.get_mut(self.b);
        for co in 0..self.cout {
            db[co] += dy.data[co * p..(co + 1) * p].iter().sum::<f64>();
        }
    }

    pub fn desc(&self, frames: usize, h: usize, w: usize) -> LayerDesc {
        LayerDesc::new("conv3d", self.cin, self.cout, vec![self.kt, self.k, self.k], self.cout * self.out_frames(frames) * h * w)
    }
}

/// Sum over `p × p` blocks; partial blocks at the border are summed as-is.
pub fn sum_pool(x: &Act, p: usize) -> Act {
    let (oh, ow) = (x.h.div_ceil(p), x.w.div_ceil(p));
    let mut y = Act::zeros(x.c, oh, ow);
    for c in 0..x.c {
        for i in 0..x.h {
            for j in 0..x.w {
                y.data[(c * oh + i / p) * ow + j / p] += x.data[(c * x.h + i) * x.w + j];
            }
        }
    }
    y
}

pub fn sum_pool_backward(dy: &Act, p: usize, h: usize, w: usize) -> Act {
    let mut dx = Act::zeros(dy.c, h, w);
    for c in 0..dy.c {
        for i in 0..h {
            for j in 0..w {
                dx.data[(c * h + i) * w + j] = dy.data[(c * dy.h + i / p) * dy.w + j / p];
            }
        }
    }
    dx
}

pub fn sum_pool_desc(c: usize, oh: usize, ow: usize, p: usize) -> LayerDesc {
    LayerDesc::new("sum_pool", c, c, vec![p, p], c * oh * ow)
}

/// Transposed convolution with kernel = stride = `p`, cropped to a target size.
#[derive(Debug, Clone)]
pub struct Upsample {
    pub w: ParamId,
    pub b: ParamId,
    pub cin: usize,
    pub cout: usize,
    pub p: usize,
}

impl Upsample {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, cin: usize, cout: usize, p: usize, slope: f64, rng: &mut R) -> Self {
        let w = store.add_weight(&format!("{name}.weight"), &[p, p, cout, cin], cin, slope, rng);
        let b = store.add_zeros(&format!("{name}.bias"), &[cout]);
        Self { w, b, cin, cout, p }
    }

    pub fn forward(&self, store: &ParamStore, x: &Act, oh: usize, ow: usize) -> Act {
        assert_eq!(x.c, self.cin, "upsample input channels");
        assert!(oh <= x.h * self.p && ow <= x.w * self.p, "crop larger than upsampled map");
        let (p, plane) = (self.p, x.plane());
        let w = store.get(self.w);
        let b = store.get(self.b);
        let mut y = Act::zeros(self.cout, oh, ow);
        let mut z = vec![0.0; self.cout * plane];
        for di in 0..p {
            for dj in 0..p {
                let wd = &w[(di * p + dj) * self.cout * self.cin..][..self.cout * self.cin];
                gemm(self.cout, self.cin, plane, wd, false, &x.data, false, &mut z, false);
                for co in 0..self.cout {
                    for i in 0..x.h {
                        let oy = i * p + di;
                        if oy >= oh {
                            break;
                        }
                        for j in 0..x.w {
                            let ox = j * p + dj;
                            if ox < ow {
                                y.data[(co * oh + oy) * ow + ox] = z[co * plane + i * x.w + j] + b[co];
                            }
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, store: &ParamStore, grads: &mut Grads, x: &Act, dy: &Act) -> Act {
        let (p, plane) = (self.p, x.plane());
        let (oh, ow) = (dy.h, dy.w);
        let mut dx = Act::zeros(x.c, x.h, x.w);
        let mut dz = vec![0.0; self.cout * plane];
        {
            let db = grads.get_mut(self.b);
            for co in 0..self.cout {
                db[co] += dy.channel(co).iter().sum::<f64>();
            }
        }
        for di in 0..p {
            for dj in 0..p {
                dz.fill(0.0);
                for co in 0..self.cout {
                    for i in 0..x.h {
                        let oy = i * p + di;
                        if oy >= oh {
                            break;
                        }
                        for j in 0..x.w {
                            let ox = j * p + dj;
                            if ox < ow {
                                dz[co * plane + i * x.w + j] = dy.data[(co * oh + oy) * ow + ox];
                            }
                        }
                    }
                }
                let off = (di * p + dj) * self.cout * self.cin;
                gemm(self.cout, plane, self.cin, &dz, false, &x.data, true, &mut grads.get_mut(self.w)[off..off + self.cout * self.cin], true);
                let wd = &store.get(self.w)[off..off + self.cout * self.cin];
                gemm(self.cin, self.cout, plane, wd, true, &dz, false, &mut dx.data, true);
            }
        }
        dx
    }

    pub fn desc(&self, oh: usize, ow: usize) -> LayerDesc {
        LayerDesc::new("transposed_conv", self.cin, self.cout, vec![1, 1], self.cout * oh * ow)
    }
}

/// Fully connected layer `y = W x + b`, `W` stored `(out, in)`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fin: usize,
    pub fout: usize,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, fin: usize, fout: usize, slope: f64, rng: &mut R) -> Self {
        let w = store.add_weight(&format!("{name}.weight"), &[fout, fin], fin, slope, rng);
        let b = store.add_zeros(&format!("{name}.bias"), &[fout]);
        Self { w, b, fin, fout }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.fin, "linear input size");
        let mut y = store.get(self.b).to_vec();
        gemm(self.fout, self.fin, 1, store.get(self.w), false, x, false, &mut y, true);
        y
    }

    pub fn backward(&self, store: &ParamStore, grads: &mut Grads, x: &[f64], dy: &[f64]) -> Vec<f64> {
        gemm(self.fout, 1, self.fin, dy, false, x, false, grads.get_mut(self.w), true);
        grads.get_mut(self.b).iter_mut().zip(dy).for_each(|(g, d)| *g += d);
        let mut dx = vec![0.0; self.fin];
        gemm(self.fin, self.fout, 1, store.get(self.w), true, dy, false, &mut dx, false);
        dx
    }

    pub fn desc(&self) -> LayerDesc {
        LayerDesc::new("linear", self.fin, self.fout, vec![1], self.fout)
    }
}
