//! Named parameter tensors, their gradients and on-disk checkpoints.
//!
//! A checkpoint directory holds `params.toml` (name, shape, file per tensor)
//! and one f64 tensor file per parameter.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use spider_core::data::{Precision, TensorFile};
use spider_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Index {
    param: Vec<IndexEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, shape: &[usize], value: Vec<f64>) -> ParamId {
        assert!(self.params.iter().all(|p| p.name != name), "duplicate parameter {name}");
        self.params.push(Param { name: name.to_string(), shape: shape.to_vec(), value });
        ParamId(self.params.len() - 1)
    }

    /// Kaiming-uniform weights for a layer followed by a leaky ReLU of `slope`.
    pub fn add_weight<R: Rng>(&mut self, name: &str, shape: &[usize], fan_in: usize, slope: f64, rng: &mut R) -> ParamId {
        let bound = (6.0 / ((1.0 + slope * slope) * fan_in.max(1) as f64)).sqrt();
        let n = shape.iter().product();
        let value = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        self.push(name, shape, value)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        let n = shape.iter().product();
        self.push(name, shape, vec![0.0; n])
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalars.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// FNV-1a over names and value bits; equal checksums mean identical parameters.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for p in &self.params {
            feed(p.name.as_bytes());
            for v in &p.value {
                feed(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    pub fn zero_grads(&self) -> Grads {
        Grads { bufs: self.params.iter().map(|p| vec![0.0; p.value.len()]).collect() }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut index = Index { param: Vec::with_capacity(self.params.len()) };
        for (k, p) in self.params.iter().enumerate() {
            let file = format!("p{k:03}.spdr");
            TensorFile::new([1, 1, p.value.len()], p.value.clone())?.write(&dir.join(&file), Precision::F64)?;
            index.param.push(IndexEntry { name: p.name.clone(), shape: p.shape.clone(), file });
        }
        let text = toml::to_string(&index).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("params.toml"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index_path = dir.join("params.toml");
        let text = std::fs::read_to_string(&index_path)?;
        let index: Index = toml::from_str(&text).map_err(|e| Error::Format { path: index_path.clone(), message: e.to_string() })?;
        let mut store = ParamStore::new();
        for e in index.param {
            let path = dir.join(&e.file);
            let tf = TensorFile::read(&path)?;
            if tf.data.len() != e.shape.iter().product::<usize>() {
                return Err(Error::Format { path, message: format!("size disagrees with shape {:?}", e.shape) });
            }
            store.push(&e.name, &e.shape, tf.data);
        }
        Ok(store)
    }

    /// Fails unless `other` has the same names and shapes in the same order.
    pub fn check_layout(&self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Shape(format!("{} parameters, expected {}", other.params.len(), self.params.len())));
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.name != b.name || a.shape != b.shape {
                return Err(Error::Shape(format!("parameter {} {:?} does not match {} {:?}", b.name, b.shape, a.name, a.shape)));
            }
        }
        Ok(())
    }
}

/// Gradient buffers parallel to a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    bufs: Vec<Vec<f64>>,
}

impl Grads {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.bufs[id.0]
    }

    pub fn bufs(&self) -> &[Vec<f64>] {
        &self.bufs
    }

    pub fn clear(&mut self) {
        self.bufs.iter_mut().for_each(|b| b.fill(0.0));
    }

    pub fn scale(&mut self, s: f64) {
        self.bufs.iter_mut().flatten().for_each(|g| *g *= s);
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}
