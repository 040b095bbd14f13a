//! Loader for `timestamp_ms,cell_id,traffic` records (Milan square-id layout).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::series::DatasetSeries;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridGeometry, TrafficSnapshot};

/// Bookkeeping produced alongside a loaded series.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub records: usize,
    pub buckets: usize,
    /// Buckets inside the covered span that had no records at all.
    pub empty_buckets: usize,
    /// (bucket, cell) pairs without any reading, zero-filled.
    pub missing_cells: usize,
}

pub fn load_grid_csv(path: &Path, geometry: GridGeometry, delta_minutes: u32) -> Result<(DatasetSeries, LoadReport)> {
    let file = std::fs::File::open(path)?;
    read_grid_csv(file, geometry, delta_minutes)
}

pub fn read_grid_csv<R: Read>(
    reader: R,
    geometry: GridGeometry,
    delta_minutes: u32,
) -> Result<(DatasetSeries, LoadReport)> {
    if delta_minutes == 0 {
        return Err(Error::Config("step must be positive".into()));
    }
    let bucket_ms = delta_minutes as i64 * 60_000;
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut sums: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
    let mut report = LoadReport::default();
    for (k, record) in csv.records().enumerate() {
        let line = k + 1;
        let record = record.map_err(|e| Error::Ingestion { line, message: e.to_string() })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && record.get(0).map(|f| f.parse::<f64>().is_err()).unwrap_or(false) {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Ingestion { line, message: format!("expected 3 fields, found {}", record.len()) });
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let ts: i64 = field(0)
            .parse()
            .map_err(|_| Error::Ingestion { line, message: format!("bad timestamp {:?}", field(0)) })?;
        let cell: i64 = field(1)
            .parse()
            .map_err(|_| Error::Ingestion { line, message: format!("bad cell id {:?}", field(1)) })?;
        let value: f64 = field(2)
            .parse()
            .map_err(|_| Error::Ingestion { line, message: format!("bad traffic value {:?}", field(2)) })?;
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Ingestion { line, message: format!("traffic must be non-negative, got {value}") });
        }
        if cell < 1 || cell as usize > geometry.cells() {
            return Err(Error::Range(format!("line {line}: cell id {cell} outside 1..={}", geometry.cells())));
        }
        let bucket = ts.div_euclid(bucket_ms);
        let slot = &mut sums.entry(bucket).or_insert_with(|| vec![None; geometry.cells()])[cell as usize - 1];
        *slot = Some(slot.unwrap_or(0.0) + value);
        report.records += 1;
    }

    let (Some(&first), Some(&last)) = (sums.keys().next(), sums.keys().next_back()) else {
        return Ok((DatasetSeries::new(geometry, delta_minutes, vec![])?, report));
    };
    let mut snapshots = Vec::with_capacity((last - first + 1) as usize);
    for t in first..=last {
        let values = match sums.get(&t) {
            Some(cells) => {
                report.missing_cells += cells.iter().filter(|c| c.is_none()).count();
                cells.iter().map(|c| c.unwrap_or(0.0)).collect()
            }
            None => {
                report.empty_buckets += 1;
                report.missing_cells += geometry.cells();
                vec![0.0; geometry.cells()]
            }
        };
        snapshots.push(TrafficSnapshot::new(t, Grid::from_vec(geometry.rows, geometry.cols, values)?)?);
    }
    report.buckets = snapshots.len();
    Ok((DatasetSeries::new(geometry, delta_minutes, snapshots)?, report))
}
