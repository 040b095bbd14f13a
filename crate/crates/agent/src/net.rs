//! Pseudo-action network: current sparse frame, time features and recent
//! actions in, a continuous (row, col) out.

use serde::{Deserialize, Serialize};
use spider_core::{sampling, Error, GridGeometry, Result, SparseMeasurement};
use spider_nn::{conv_out, lrelu, lrelu_backward, sum_pool, sum_pool_backward, Act, Conv2d, Grads, Linear, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentNetConfig {
    pub conv1: usize,
    pub conv2: usize,
    pub reduce: usize,
    pub hidden: usize,
    pub lrelu_slope: f64,
}

impl Default for AgentNetConfig {
    fn default() -> Self {
        Self { conv1: 8, conv2: 16, reduce: 16, hidden: 64, lrelu_slope: 0.2 }
    }
}

/// Continuous action in grid units; cell `(i, j)` spans `[i, i+1) × [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoAction {
    pub row: f64,
    pub col: f64,
}

#[derive(Debug, Clone)]
pub struct AgentNet {
    pub geometry: GridGeometry,
    pub config: AgentNetConfig,
    pub prev_actions_len: usize,
    pub params: ParamStore,
    conv1: Conv2d,
    conv2: Conv2d,
    reduce: Conv2d,
    fc1: Linear,
    fc2: Linear,
}

/// Intermediate values of one forward pass.
pub struct NetTrace {
    x: Act,
    c1_cols: Vec<f64>,
    a1: Act,
    pooled: Act,
    c2_cols: Vec<f64>,
    a2: Act,
    r_cols: Vec<f64>,
    a3: Act,
    flat: Vec<f64>,
    h: Vec<f64>,
    /// Unclamped network output in grid units.
    pub raw: [f64; 2],
}

impl AgentNet {
    pub fn new(geometry: GridGeometry, config: AgentNetConfig, prev_actions_len: usize, seed: u64) -> Result<Self> {
        if prev_actions_len == 0 {
            return Err(Error::Config("prev_actions_len must be at least 1".into()));
        }
        if [config.conv1, config.conv2, config.reduce, config.hidden].contains(&0) {
            return Err(Error::Config(format!("agent widths must be positive: {config:?}")));
        }
        let a = config.lrelu_slope;
        let mut rng = sampling::rng(seed);
        let mut params = ParamStore::new();
        let conv1 = Conv2d::same(&mut params, "agent.conv1", 2, config.conv1, 3, a, &mut rng);
        let conv2 = Conv2d::same(&mut params, "agent.conv2", config.conv1, config.conv2, 3, a, &mut rng);
        let reduce = Conv2d::new(&mut params, "agent.reduce", config.conv2, config.reduce, 2, 2, 0, a, &mut rng);
        let (ph, pw) = (geometry.rows.div_ceil(2), geometry.cols.div_ceil(2));
        let (rh, rw) = (conv_out(ph, 2, 2, 0), conv_out(pw, 2, 2, 0));
        let flat = config.reduce * rh * rw + 3 + prev_actions_len;
        let fc1 = Linear::new(&mut params, "agent.fc1", flat, config.hidden, a, &mut rng);
        let fc2 = Linear::new(&mut params, "agent.fc2", config.hidden, 2, 1.0, &mut rng);
        Ok(Self { geometry, config, prev_actions_len, params, conv1, conv2, reduce, fc1, fc2 })
    }

    /// Most recent action last; padded at the front with −1, entries scaled
    /// to `index / cells`.
    pub fn encode_actions(&self, prev: &[usize]) -> Vec<f64> {
        let n = self.prev_actions_len;
        let cells = self.geometry.cells() as f64;
        let tail = &prev[prev.len().saturating_sub(n)..];
        let mut out = vec![-1.0; n - tail.len()];
        out.extend(tail.iter().map(|&a| a as f64 / cells));
        out
    }

    pub fn forward(&self, frame: &SparseMeasurement, time: [f64; 3], prev: &[usize]) -> Result<NetTrace> {
        let g = frame.geometry();
        if !g.same_shape(&self.geometry) {
            return Err(Error::Shape(format!("frame {}x{} vs agent grid {}x{}", g.rows, g.cols, self.geometry.rows, self.geometry.cols)));
        }
        let a = self.config.lrelu_slope;
        let mut data = frame.values.as_slice().to_vec();
        data.extend(frame.mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }));
        // non-finite inputs are treated as missing
        data.iter_mut().filter(|v| !v.is_finite()).for_each(|v| *v = 0.0);
        let x = Act::from_vec(2, g.rows, g.cols, data);
        let (mut a1, c1_cols) = self.conv1.forward(&self.params, &x);
        lrelu(&mut a1, a);
        let pooled = sum_pool(&a1, 2);
        let (mut a2, c2_cols) = self.conv2.forward(&self.params, &pooled);
        lrelu(&mut a2, a);
        let (mut a3, r_cols) = self.reduce.forward(&self.params, &a2);
        lrelu(&mut a3, a);
        let mut flat = a3.data.clone();
        flat.extend(time.iter().map(|v| if v.is_finite() { *v } else { 0.0 }));
        flat.extend(self.encode_actions(prev));
        let mut h = self.fc1.forward(&self.params, &flat);
        h.iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v *= a;
            }
        });
        let o = self.fc2.forward(&self.params, &h);
        let raw = [(0.5 + o[0]) * g.rows as f64, (0.5 + o[1]) * g.cols as f64];
        Ok(NetTrace { x, c1_cols, a1, pooled, c2_cols, a2, r_cols, a3, flat, h, raw })
    }

    /// Clamps into `[0, rows) × [0, cols)`; a non-finite coordinate maps to
    /// the grid centre.
    pub fn clamp(&self, raw: [f64; 2]) -> PseudoAction {
        let fix = |v: f64, n: usize| {
            let hi = n as f64 * (1.0 - f64::EPSILON);
            if v.is_finite() {
                v.clamp(0.0, hi)
            } else {
                n as f64 / 2.0
            }
        };
        PseudoAction { row: fix(raw[0], self.geometry.rows), col: fix(raw[1], self.geometry.cols) }
    }

    /// Accumulates gradients of `‖raw − target‖²`; returns the loss.
    pub fn backward(&self, grads: &mut Grads, t: &NetTrace, target: [f64; 2]) -> f64 {
        let a = self.config.lrelu_slope;
        let g = self.geometry;
        let d = [t.raw[0] - target[0], t.raw[1] - target[1]];
        let loss = d[0] * d[0] + d[1] * d[1];
        let d_o = [2.0 * d[0] * g.rows as f64, 2.0 * d[1] * g.cols as f64];
        let mut dh = self.fc2.backward(&self.params, grads, &t.h, &d_o);
        dh.iter_mut().zip(&t.h).for_each(|(d, &h)| {
            if h < 0.0 {
                *d *= a;
            }
        });
        let dflat = self.fc1.backward(&self.params, grads, &t.flat, &dh);
        let mut d3 = Act::from_vec(t.a3.c, t.a3.h, t.a3.w, dflat[..t.a3.data.len()].to_vec());
        lrelu_backward(&t.a3, &mut d3, a);
        let mut d2 = self.reduce.backward(&self.params, grads, (t.a2.h, t.a2.w), &t.r_cols, &d3, true).expect("dx");
        lrelu_backward(&t.a2, &mut d2, a);
        let dp = self.conv2.backward(&self.params, grads, (t.pooled.h, t.pooled.w), &t.c2_cols, &d2, true).expect("dx");
        let mut d1 = sum_pool_backward(&dp, 2, t.a1.h, t.a1.w);
        lrelu_backward(&t.a1, &mut d1, a);
        self.conv1.backward(&self.params, grads, (t.x.h, t.x.w), &t.c1_cols, &d1, false);
        loss
    }
}

pub fn pseudo_action(net: &AgentNet, frame: &SparseMeasurement, time: [f64; 3], prev: &[usize]) -> Result<PseudoAction> {
    Ok(net.clamp(net.forward(frame, time, prev)?.raw))
}
