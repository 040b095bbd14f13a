//! Episode records and their line-delimited JSON form.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use spider_core::{Error, GridGeometry, Result, SelectionMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub t: i64,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub final_selection: SelectionMatrix,
    pub final_mae: f64,
    pub truncated: bool,
}

impl EpisodeLog {
    pub fn iterations(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    t: i64,
    rows: usize,
    cols: usize,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    selected: Vec<usize>,
    final_mae: f64,
    truncated: bool,
}

pub fn write_episode_logs(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for l in logs {
        let g = l.final_selection.geometry();
        let rec = Record {
            t: l.t,
            rows: g.rows,
            cols: g.cols,
            actions: l.actions.clone(),
            rewards: l.rewards.clone(),
            selected: l.final_selection.indices(),
            final_mae: l.final_mae,
            truncated: l.truncated,
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episode_logs(path: &Path) -> Result<Vec<EpisodeLog>> {
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
        let final_selection = SelectionMatrix::from_indices(r.t, g, &r.selected).map_err(|e| bad(e.to_string()))?;
        out.push(EpisodeLog { t: r.t, actions: r.actions, rewards: r.rewards, final_selection, final_mae: r.final_mae, truncated: r.truncated });
    }
    Ok(out)
}
