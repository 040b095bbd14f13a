//! Flat binary tensor container.
//!
//! Little-endian header: magic `SPDR`, `u32` version, then `u32` T, X, Y,
//! followed by `T·X·Y` values, row-major and time-major. Version 1 stores
//! `f32` values (series caches); version 2 stores `f64` (model parameters,
//! so checkpoints roundtrip bit-exactly).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::series::DatasetSeries;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridGeometry, TrafficSnapshot};

pub const MAGIC: &[u8; 4] = b"SPDR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32 = 1,
    F64 = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl TensorFile {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!("{} values for dims {dims:?}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn write_to<W: Write>(&self, mut w: W, precision: Precision) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(precision as u32).to_le_bytes())?;
        for d in self.dims {
            let d = u32::try_from(d).map_err(|_| Error::Range(format!("dimension {d} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        match precision {
            Precision::F32 => self.data.iter().for_each(|&v| buf.extend_from_slice(&(v as f32).to_le_bytes())),
            Precision::F64 => self.data.iter().for_each(|&v| buf.extend_from_slice(&v.to_le_bytes())),
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R, origin: &Path) -> Result<Self> {
        let bad = |message: String| Error::Format { path: origin.to_path_buf(), message };
        let mut header = [0u8; 20];
        r.read_exact(&mut header).map_err(|_| bad("truncated header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(bad("missing SPDR magic".into()));
        }
        let word = |k: usize| u32::from_le_bytes(header[4 * k..4 * k + 4].try_into().expect("4 bytes")) as usize;
        let width = match word(1) {
            1 => 4,
            2 => 8,
            v => return Err(bad(format!("unsupported version {v}"))),
        };
        let dims = [word(2), word(3), word(4)];
        let n: usize = dims.iter().product();
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != n * width {
            return Err(bad(format!("expected {} payload bytes, found {}", n * width, body.len())));
        }
        let data = if width == 4 {
            body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4")) as f64).collect()
        } else {
            body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect()
        };
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path, precision: Precision) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(f, precision)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(f, path)
    }
}

/// Sidecar describing where a cached tensor sits in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesManifest {
    pub geometry: GridGeometry,
    pub delta_minutes: u32,
    pub first_t: i64,
    pub len: usize,
}

/// Writes `<stem>.spdr` (f32 values) and returns the manifest to store beside it.
pub fn write_series_cache(series: &DatasetSeries, path: &Path) -> Result<SeriesManifest> {
    let g = series.geometry;
    let mut data = Vec::with_capacity(series.len() * g.cells());
    for s in series.snapshots() {
        data.extend_from_slice(s.values.as_slice());
    }
    TensorFile::new([series.len(), g.rows, g.cols], data)?.write(path, Precision::F32)?;
    Ok(SeriesManifest { geometry: g, delta_minutes: series.delta_minutes, first_t: series.first_t().unwrap_or(0), len: series.len() })
}

pub fn read_series_cache(path: &Path, manifest: &SeriesManifest) -> Result<DatasetSeries> {
    let tf = TensorFile::read(path)?;
    let g = manifest.geometry;
    if tf.dims != [manifest.len, g.rows, g.cols] {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("dims {:?} disagree with manifest", tf.dims),
        });
    }
    let snapshots = tf
        .data
        .chunks_exact(g.cells().max(1))
        .take(manifest.len)
        .enumerate()
        .map(|(k, c)| TrafficSnapshot::new(manifest.first_t + k as i64, Grid::from_vec(g.rows, g.cols, c.to_vec())?))
        .collect::<Result<Vec<_>>>()?;
    DatasetSeries::new(g, manifest.delta_minutes, snapshots)
}
