//! Labeled (episode-start window, final selection) pairs for training the
//! one-shot policy network, and their line-delimited JSON form.
//!
//! One JSON object per line:
//! `{"t", "rows", "cols", "time": [hour, day, week], "label": [cell indices],
//!   "frames": [{"t", "mask": [cell indices], "values": base64}]}`
//! where `values` is the full row-major frame as little-endian f32. Frames
//! are oldest first; the last one is the (empty) current frame.

use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use spider_core::data::DatasetSeries;
use spider_core::{apply_mask, Error, Grid, GridGeometry, Result, SelectionMatrix, SparseMeasurement, StateWindow};
use spider_env::EpisodeLog;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSample {
    pub window: StateWindow,
    pub label: SelectionMatrix,
    pub time_features: [f64; 3],
}

pub type SelectionDataset = Vec<SelectionSample>;

fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

/// Window ending at `t` whose history frames are `truth` masked by the given
/// past selections (empty where none is known) and whose current frame is
/// empty. Values are rounded to f32 so the window survives serialization.
pub fn history_window(truth: &DatasetSeries, t: i64, frames: usize, past: &HashMap<i64, SelectionMatrix>) -> Result<StateWindow> {
    if frames == 0 {
        return Err(Error::Config("window needs at least one frame".into()));
    }
    let g = truth.geometry;
    let mut out = Vec::with_capacity(frames);
    for ts in (t - frames as i64 + 1)..t {
        let frame = match (past.get(&ts), truth.contains(ts)) {
            (Some(sel), true) => {
                let mut sel = sel.clone();
                sel.t = ts;
                let mut m = apply_mask(truth.get(ts)?, &sel)?;
                m.values.as_mut_slice().iter_mut().for_each(|v| *v = f32_exact(*v));
                m
            }
            _ => SparseMeasurement::empty(ts, g),
        };
        out.push(frame);
    }
    out.push(SparseMeasurement::empty(t, g));
    StateWindow::new(out)
}

/// One pair per episode. History frames come from the final selections of
/// the other logged episodes, matching what the environment saw when the
/// logs were produced in order. `truth` is the normalized series.
pub fn export_selection_dataset(logs: &[EpisodeLog], truth: &DatasetSeries, window_frames: usize) -> Result<SelectionDataset> {
    if logs.is_empty() {
        return Err(Error::EmptyInput("no episode logs to export".into()));
    }
    let clock = truth.clock();
    let mut past = HashMap::new();
    let mut out = Vec::with_capacity(logs.len());
    for log in logs {
        let window = history_window(truth, log.t, window_frames, &past)?;
        out.push(SelectionSample { window, label: log.final_selection.clone(), time_features: clock.time_features(log.t) });
        past.insert(log.t, log.final_selection.clone());
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    t: i64,
    mask: Vec<usize>,
    values: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    t: i64,
    rows: usize,
    cols: usize,
    time: [f64; 3],
    label: Vec<usize>,
    frames: Vec<FrameRecord>,
}

pub fn write_selection_dataset(path: &Path, data: &[SelectionSample]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for s in data {
        let g = s.window.geometry();
        let frames = s
            .window
            .frames()
            .iter()
            .map(|f| {
                let bytes: Vec<u8> = f.values.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
                FrameRecord { t: f.t, mask: f.mask.indices(), values: STANDARD.encode(bytes) }
            })
            .collect();
        let rec = Record { t: s.window.t(), rows: g.rows, cols: g.cols, time: s.time_features, label: s.label.indices(), frames };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_selection_dataset(path: &Path) -> Result<SelectionDataset> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Format { path: path.to_path_buf(), message: format!("line {}: {message}", k + 1) };
        let r: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let g = GridGeometry::new(r.rows, r.cols)?;
        let frames = r
            .frames
            .into_iter()
            .map(|fr| {
                let bytes = STANDARD.decode(&fr.values).map_err(|e| bad(e.to_string()))?;
                if bytes.len() != 4 * g.cells() {
                    return Err(bad(format!("frame at t={} holds {} bytes, expected {}", fr.t, bytes.len(), 4 * g.cells())));
                }
                let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
                Ok(SparseMeasurement {
                    t: fr.t,
                    values: Grid::from_vec(g.rows, g.cols, values)?,
                    mask: SelectionMatrix::from_indices(fr.t, g, &fr.mask).map_err(|e| bad(e.to_string()))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let window = StateWindow::new(frames).map_err(|e| bad(e.to_string()))?;
        let label = SelectionMatrix::from_indices(r.t, g, &r.label).map_err(|e| bad(e.to_string()))?;
        out.push(SelectionSample { window, label, time_features: r.time });
    }
    Ok(out)
}
