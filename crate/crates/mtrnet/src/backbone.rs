//! Three-stage convolutional trunk shared by the reconstruction and policy
//! networks.
//!
//! 1. Correlation capture: a 3D convolution over (time, row, col), leaky
//!    ReLU, spatial sum pooling, then a 1×1 projection (optionally after
//!    appending constant side-channels such as time features).
//! 2. Feature extraction: `n` conv+LReLU blocks; block `b` (even, ≥ 2) also
//!    receives block `b − 2`'s output, and the stage output adds the
//!    projected input back in.
//! 3. Summarization: a learned `p × p` transposed convolution restores the
//!    grid size, then three 3×3 convolutions narrow to one output channel.

use rand::Rng;
use serde::{Deserialize, Serialize};
use spider_core::{Error, Result};
use spider_nn::{lrelu, lrelu_backward, sum_pool, sum_pool_backward, Act, Conv2d, Conv3dTime, Grads, LayerDesc, ParamStore, Upsample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub frames: usize,
    /// Planes per frame (values, optionally the mask).
    #[serde(default = "one")]
    pub in_channels: usize,
    pub time_kernel: usize,
    /// `[3D stage, feature stage, summary 1, summary 2]`.
    pub channels: Vec<usize>,
    pub n_feature_layers: usize,
    pub pool_factor: usize,
    pub slope: f64,
    pub extra_channels: usize,
}

fn one() -> usize {
    1
}

impl BackboneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != 4 || self.channels.iter().any(|&c| c == 0) {
            return Err(Error::Config(format!("expected four positive channel widths, got {:?}", self.channels)));
        }
        if self.in_channels == 0 {
            return Err(Error::Config("at least one input plane per frame is required".into()));
        }
        if self.frames < 2 {
            return Err(Error::Config(format!("window needs at least 2 frames, got {}", self.frames)));
        }
        if self.time_kernel == 0 || self.time_kernel > self.frames {
            return Err(Error::Config(format!("time kernel {} must lie in 1..={}", self.time_kernel, self.frames)));
        }
        if self.n_feature_layers == 0 {
            return Err(Error::Config("at least one feature layer is required".into()));
        }
        if self.pool_factor == 0 {
            return Err(Error::Config("pool factor must be positive".into()));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(Error::Config(format!("leaky ReLU slope must lie in (0, 1), got {}", self.slope)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Backbone {
    pub spec: BackboneSpec,
    conv3d: Conv3dTime,
    proj: Conv2d,
    blocks: Vec<Conv2d>,
    up: Upsample,
    s1: Conv2d,
    s2: Conv2d,
    s3: Conv2d,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    input_dims: (usize, usize),
    c3_cols: Vec<f64>,
    a3: Act,
    proj_in: Act,
    proj_cols: Vec<f64>,
    /// `g[0]` is the projected input, `g[b]` the output of block `b`.
    pub g: Vec<Act>,
    h: Vec<Act>,
    block_cols: Vec<Vec<f64>>,
    /// Feature-stage output, `g[n] + g[0]`.
    pub stage_out: Act,
    up: Act,
    s1_cols: Vec<f64>,
    s1: Act,
    s2_cols: Vec<f64>,
    s2: Act,
    s3_cols: Vec<f64>,
    /// One-channel output before any clipping or squashing.
    pub out: Act,
}

impl Backbone {
    pub fn build<R: Rng>(spec: BackboneSpec, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let [c3, f, s1, s2] = [spec.channels[0], spec.channels[1], spec.channels[2], spec.channels[3]];
        let a = spec.slope;
        let tp = spec.frames + 1 - spec.time_kernel;
        let conv3d = Conv3dTime::new(store, "corr.conv3d", spec.in_channels, c3, spec.time_kernel, 3, a, rng);
        let proj = Conv2d::same(store, "corr.proj", c3 * tp + spec.extra_channels, f, 1, 1.0, rng);
        let blocks = (0..spec.n_feature_layers).map(|b| Conv2d::same(store, &format!("feat.{b}"), f, f, 3, a, rng)).collect();
        let up = Upsample::new(store, "summ.up", f, f, spec.pool_factor, a, rng);
        let s1c = Conv2d::same(store, "summ.conv1", f, s1, 3, a, rng);
        let s2c = Conv2d::same(store, "summ.conv2", s1, s2, 3, a, rng);
        let s3c = Conv2d::same(store, "summ.conv3", s2, 1, 3, 1.0, rng);
        Ok(Self { spec, conv3d, proj, blocks, up, s1: s1c, s2: s2c, s3: s3c })
    }

    /// Parameter names of the feature blocks (the non-skip path of stage 2).
    pub fn feature_params(&self) -> Vec<String> {
        (0..self.blocks.len()).flat_map(|b| [format!("feat.{b}.weight"), format!("feat.{b}.bias")]).collect()
    }

    pub fn forward(&self, store: &ParamStore, x: &Act, extra: &[f64]) -> Trace {
        assert_eq!(x.c, self.spec.frames * self.spec.in_channels, "window length");
        assert_eq!(extra.len(), self.spec.extra_channels, "side channels");
        let a = self.spec.slope;
        let p = self.spec.pool_factor;
        let (c3_out, c3_cols) = self.conv3d.forward(store, x);
        let mut a3 = c3_out;
        lrelu(&mut a3, a);
        let pooled = sum_pool(&a3, p);
        let proj_in = if extra.is_empty() { pooled } else { pooled.concat(&Act::broadcast(extra, pooled.h, pooled.w)) };
        let (g0, proj_cols) = self.proj.forward(store, &proj_in);
        let n = self.blocks.len();
        let mut g = Vec::with_capacity(n + 1);
        g.push(g0);
        let mut h = Vec::with_capacity(n);
        let mut block_cols = Vec::with_capacity(n);
        for (i, conv) in self.blocks.iter().enumerate() {
            let b = i + 1;
            let (mut hb, cols) = conv.forward(store, &g[b - 1]);
            lrelu(&mut hb, a);
            let mut gb = hb.clone();
            if b % 2 == 0 {
                gb.add_assign(&g[b - 2]);
            }
            h.push(hb);
            block_cols.push(cols);
            g.push(gb);
        }
        let mut stage_out = g[n].clone();
        stage_out.add_assign(&g[0]);
        let mut up = self.up.forward(store, &stage_out, x.h, x.w);
        lrelu(&mut up, a);
        let (mut s1, s1_cols) = self.s1.forward(store, &up);
        lrelu(&mut s1, a);
        let (mut s2, s2_cols) = self.s2.forward(store, &s1);
        lrelu(&mut s2, a);
        let (out, s3_cols) = self.s3.forward(store, &s2);
        Trace { input_dims: (x.h, x.w), c3_cols, a3, proj_in, proj_cols, g, h, block_cols, stage_out, up, s1_cols, s1, s2_cols, s2, s3_cols, out }
    }

    /// Accumulates parameter gradients for `dout = ∂loss/∂trace.out`.
    pub fn backward(&self, store: &ParamStore, grads: &mut Grads, t: &Trace, dout: &Act) {
        let a = self.spec.slope;
        let (h, w) = t.input_dims;
        let mut d = self.s3.backward(store, grads, (h, w), &t.s3_cols, dout, true).expect("dx");
        lrelu_backward(&t.s2, &mut d, a);
        let mut d = self.s2.backward(store, grads, (h, w), &t.s2_cols, &d, true).expect("dx");
        lrelu_backward(&t.s1, &mut d, a);
        let mut d = self.s1.backward(store, grads, (h, w), &t.s1_cols, &d, true).expect("dx");
        lrelu_backward(&t.up, &mut d, a);
        let d_stage = self.up.backward(store, grads, &t.stage_out, &d);

        let n = self.blocks.len();
        let mut dg: Vec<Act> = t.g.iter().map(|x| Act::zeros(x.c, x.h, x.w)).collect();
        dg[n].add_assign(&d_stage);
        dg[0].add_assign(&d_stage);
        for b in (1..=n).rev() {
            let mut dh = dg[b].clone();
            if b % 2 == 0 {
                let carry = dg[b].clone();
                dg[b - 2].add_assign(&carry);
            }
            lrelu_backward(&t.h[b - 1], &mut dh, a);
            let prev = &t.g[b - 1];
            let dx = self.blocks[b - 1].backward(store, grads, (prev.h, prev.w), &t.block_cols[b - 1], &dh, true).expect("dx");
            dg[b - 1].add_assign(&dx);
        }
        let d_in = self.proj.backward(store, grads, (t.proj_in.h, t.proj_in.w), &t.proj_cols, &dg[0], true).expect("dx");
        let keep = t.a3.c * d_in.plane();
        let d_pooled = Act::from_vec(t.a3.c, d_in.h, d_in.w, d_in.data[..keep].to_vec());
        let mut d_a3 = sum_pool_backward(&d_pooled, self.spec.pool_factor, h, w);
        lrelu_backward(&t.a3, &mut d_a3, a);
        self.conv3d.backward(grads, &t.c3_cols, &d_a3);
    }

    /// Layer inventory for a `rows × cols` grid, in execution order.
    pub fn layer_descs(&self, rows: usize, cols: usize) -> Vec<LayerDesc> {
        let s = &self.spec;
        let p = s.pool_factor;
        let (ph, pw) = (rows.div_ceil(p), cols.div_ceil(p));
        let tp = s.frames + 1 - s.time_kernel;
        let c3 = s.channels[0] * tp;
        let f = s.channels[1];
        let mut out = vec![
            self.conv3d.desc(s.frames, rows, cols),
            LayerDesc::new("lrelu", c3, c3, vec![], c3 * rows * cols),
            spider_nn::layers::sum_pool_desc(c3, ph, pw, p),
            self.proj.desc(ph, pw),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push(b.desc(ph, pw));
            out.push(LayerDesc::new("lrelu", f, f, vec![], f * ph * pw));
            if (i + 1) % 2 == 0 {
                out.push(LayerDesc::new("add", f, f, vec![], f * ph * pw));
            }
        }
        out.push(LayerDesc::new("add", f, f, vec![], f * ph * pw));
        let cells = rows * cols;
        out.push(self.up.desc(rows, cols));
        out.push(LayerDesc::new("lrelu", f, f, vec![], f * cells));
        for (conv, c) in [(&self.s1, s.channels[2]), (&self.s2, s.channels[3])] {
            out.push(conv.desc(rows, cols));
            out.push(LayerDesc::new("lrelu", c, c, vec![], c * cells));
        }
        out.push(self.s3.desc(rows, cols));
        out
    }
}
