//! Cell grids, selection masks and sparse measurements.
//!
//! Grids are stored row-major; cell `(i, j)` is row `i`, column `j`, and its
//! flat index is `i * cols + j`. Timestamps are absolute bucket indices
//! (minutes since the Unix epoch divided by the series step).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the coverage grid: `rows` is X, `cols` is Y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_area_km2: Option<f64>,
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!("grid must be at least 1x1, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols, cell_area_km2: None })
    }

    pub fn with_cell_area(mut self, km2: f64) -> Result<Self> {
        if !(km2 > 0.0 && km2.is_finite()) {
            return Err(Error::Config(format!("cell area must be positive, got {km2}")));
        }
        self.cell_area_km2 = Some(km2);
        Ok(self)
    }

    /// The Milan deployment: 100x100 squares of 0.055 km².
    pub fn milan() -> Self {
        Self { rows: 100, cols: 100, cell_area_km2: Some(0.055) }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Cell center in continuous grid coordinates.
    pub fn center(&self, index: usize) -> (f64, f64) {
        let (r, c) = self.coords(index);
        (r as f64 + 0.5, c as f64 + 0.5)
    }

    pub fn same_shape(&self, other: &GridGeometry) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn check_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }
}

/// Dense real-valued grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(geometry: GridGeometry) -> Self {
        Self::filled(geometry, 0.0)
    }

    pub fn filled(geometry: GridGeometry, value: f64) -> Self {
        Self { rows: geometry.rows, cols: geometry.cols, data: vec![value; geometry.cells()] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a grid from nested rows; panics on ragged input (test convenience).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::from_vec(rows.len(), cols, data).expect("non-empty rows")
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry { rows: self.rows, cols: self.cols, cell_area_km2: None }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Ground-truth (or estimated) traffic over the grid at one timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSnapshot {
    pub t: i64,
    pub values: Grid,
}

impl TrafficSnapshot {
    /// Validates non-negativity.
    pub fn new(t: i64, values: Grid) -> Result<Self> {
        if let Some(v) = values.as_slice().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Domain(format!("traffic must be non-negative and finite, found {v}")));
        }
        Ok(Self { t, values })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.values.geometry()
    }
}

/// Binary mask of cells activated for measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionMatrix {
    pub t: i64,
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl SelectionMatrix {
    pub fn empty(t: i64, geometry: GridGeometry) -> Self {
        Self { t, rows: geometry.rows, cols: geometry.cols, bits: vec![false; geometry.cells()] }
    }

    pub fn full(t: i64, geometry: GridGeometry) -> Self {
        Self { t, rows: geometry.rows, cols: geometry.cols, bits: vec![true; geometry.cells()] }
    }

    pub fn from_bits(t: i64, geometry: GridGeometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geometry.cells() {
            return Err(Error::Shape(format!(
                "{} bits for a {}x{} grid",
                bits.len(),
                geometry.rows,
                geometry.cols
            )));
        }
        Ok(Self { t, rows: geometry.rows, cols: geometry.cols, bits })
    }

    /// Builds a mask from a 0/1 grid; any other value is rejected.
    pub fn from_grid(t: i64, grid: &Grid) -> Result<Self> {
        let bits = grid
            .as_slice()
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                v => Err(Error::Domain(format!("selection entries must be 0 or 1, found {v}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(t, grid.geometry(), bits)
    }

    pub fn from_indices(t: i64, geometry: GridGeometry, indices: &[usize]) -> Result<Self> {
        let mut m = Self::empty(t, geometry);
        for &i in indices {
            if i >= geometry.cells() {
                return Err(Error::Range(format!("cell {i} outside {} cells", geometry.cells())));
            }
            m.bits[i] = true;
        }
        Ok(m)
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry { rows: self.rows, cols: self.cols, cell_area_km2: None }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_set(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, on: bool) {
        self.bits[index] = on;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn rate(&self) -> f64 {
        self.count_ones() as f64 / self.bits.len() as f64
    }

    /// Selected cell indices in row-major order.
    pub fn indices(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    pub fn to_grid(&self) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// `values = snapshot ∘ mask`, with the mask carried along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMeasurement {
    pub t: i64,
    pub values: Grid,
    pub mask: SelectionMatrix,
}

impl SparseMeasurement {
    /// A frame where nothing has been collected yet.
    pub fn empty(t: i64, geometry: GridGeometry) -> Self {
        Self { t, values: Grid::zeros(geometry), mask: SelectionMatrix::empty(t, geometry) }
    }

    pub fn geometry(&self) -> GridGeometry {
        self.values.geometry()
    }

    /// Returns a copy with `index` measured at `value`.
    pub fn reveal(&self, index: usize, value: f64) -> Self {
        let mut next = self.clone();
        next.values.as_mut_slice()[index] = value;
        next.mask.set(index, true);
        next
    }

    /// Returns a copy with `index` withheld (value zeroed, bit cleared).
    pub fn withhold(&self, index: usize) -> Self {
        let mut next = self.clone();
        next.values.as_mut_slice()[index] = 0.0;
        next.mask.set(index, false);
        next
    }

    /// The masked values reinterpreted as a snapshot.
    pub fn as_snapshot(&self) -> TrafficSnapshot {
        TrafficSnapshot { t: self.t, values: self.values.clone() }
    }
}

/// Hadamard product of a snapshot and a selection matrix.
pub fn apply_mask(snapshot: &TrafficSnapshot, selection: &SelectionMatrix) -> Result<SparseMeasurement> {
    snapshot.geometry().check_same(&selection.geometry(), "apply_mask")?;
    if snapshot.t != selection.t {
        return Err(Error::Consistency(format!(
            "snapshot at t={} masked with selection for t={}",
            snapshot.t, selection.t
        )));
    }
    let data = snapshot
        .values
        .as_slice()
        .iter()
        .zip(selection.bits())
        .map(|(&v, &b)| if b { v } else { 0.0 })
        .collect();
    Ok(SparseMeasurement {
        t: snapshot.t,
        values: Grid { rows: snapshot.values.rows, cols: snapshot.values.cols, data },
        mask: selection.clone(),
    })
}

/// Recent sparse measurements, oldest first; the last frame is the current one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateWindow {
    frames: Vec<SparseMeasurement>,
}

impl StateWindow {
    pub fn new(frames: Vec<SparseMeasurement>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::EmptyInput("window has no frames".into()))?;
        let geometry = first.geometry();
        for pair in frames.windows(2) {
            if pair[1].t != pair[0].t + 1 {
                return Err(Error::Consistency(format!(
                    "window timestamps must increase by one step, got {} then {}",
                    pair[0].t, pair[1].t
                )));
            }
        }
        for f in &frames {
            geometry.check_same(&f.geometry(), "window frame")?;
            geometry.check_same(&f.mask.geometry(), "window mask")?;
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[SparseMeasurement] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn current(&self) -> &SparseMeasurement {
        self.frames.last().expect("window is never empty")
    }

    pub fn t(&self) -> i64 {
        self.current().t
    }

    pub fn geometry(&self) -> GridGeometry {
        self.current().geometry()
    }

    /// Returns a copy with the current frame replaced.
    pub fn with_current(&self, frame: SparseMeasurement) -> Result<Self> {
        let mut frames = self.frames.clone();
        *frames.last_mut().expect("non-empty") = frame;
        Self::new(frames)
    }

    /// The most recent `n` frames.
    pub fn tail(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.frames.len() {
            return Err(Error::Shape(format!("cannot take {n} frames from a window of {}", self.frames.len())));
        }
        Ok(Self { frames: self.frames[self.frames.len() - n..].to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(rows: &[[f64; 2]; 2]) -> TrafficSnapshot {
        TrafficSnapshot::new(0, Grid::from_rows(rows)).unwrap()
    }

    fn mask(rows: &[[f64; 2]; 2]) -> SelectionMatrix {
        SelectionMatrix::from_grid(0, &Grid::from_rows(rows)).unwrap()
    }

    #[test]
    fn mask_examples() {
        let f = snap(&[[1.0, 2.0], [3.0, 4.0]]);
        let m = apply_mask(&f, &mask(&[[1.0, 1.0], [1.0, 1.0]])).unwrap();
        assert_eq!(m.values, Grid::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let m = apply_mask(&f, &mask(&[[0.0, 0.0], [0.0, 0.0]])).unwrap();
        assert_eq!(m.values, Grid::from_rows(&[[0.0, 0.0], [0.0, 0.0]]));
        let m = apply_mask(&f, &mask(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        assert_eq!(m.values, Grid::from_rows(&[[1.0, 0.0], [0.0, 4.0]]));
        assert_eq!(m.mask.count_ones(), 2);
    }

    #[test]
    fn mask_errors() {
        let f = snap(&[[1.0, 2.0], [3.0, 4.0]]);
        let wrong = SelectionMatrix::full(0, GridGeometry::new(3, 2).unwrap());
        assert!(matches!(apply_mask(&f, &wrong), Err(Error::Shape(_))));
        let late = SelectionMatrix::full(5, f.geometry());
        assert!(matches!(apply_mask(&f, &late), Err(Error::Consistency(_))));
    }

    #[test]
    fn selection_rejects_non_binary() {
        let g = Grid::from_rows(&[[0.0, 0.5]]);
        assert!(SelectionMatrix::from_grid(0, &g).is_err());
    }

    #[test]
    fn window_requires_contiguous_frames() {
        let g = GridGeometry::new(2, 2).unwrap();
        let ok = StateWindow::new(vec![SparseMeasurement::empty(3, g), SparseMeasurement::empty(4, g)]);
        assert!(ok.is_ok());
        let gap = StateWindow::new(vec![SparseMeasurement::empty(3, g), SparseMeasurement::empty(5, g)]);
        assert!(matches!(gap, Err(Error::Consistency(_))));
        let mixed = StateWindow::new(vec![
            SparseMeasurement::empty(3, g),
            SparseMeasurement::empty(4, GridGeometry::new(1, 4).unwrap()),
        ]);
        assert!(matches!(mixed, Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn apply_mask_is_idempotent(values in prop::collection::vec(0.0f64..1e6, 12), bits in prop::collection::vec(any::<bool>(), 12)) {
            let geometry = GridGeometry::new(3, 4).unwrap();
            let f = TrafficSnapshot::new(7, Grid::from_vec(3, 4, values.clone()).unwrap()).unwrap();
            let b = SelectionMatrix::from_bits(7, geometry, bits.clone()).unwrap();
            let once = apply_mask(&f, &b).unwrap();
            let twice = apply_mask(&once.as_snapshot(), &b).unwrap();
            prop_assert_eq!(&once.values, &twice.values);
            for i in 0..12 {
                if bits[i] {
                    prop_assert_eq!(once.values.as_slice()[i], values[i]);
                } else {
                    prop_assert_eq!(once.values.as_slice()[i], 0.0);
                }
            }
        }
    }
}
