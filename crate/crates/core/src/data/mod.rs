//! Dataset ingestion, synthesis, splitting and caching.

mod csv_loader;
mod series;
mod synth;
pub mod tensor_file;

pub use csv_loader::{load_grid_csv, read_grid_csv, LoadReport};
pub use series::{fit_normalizer, split, DatasetSeries, SplitSpec};
pub use synth::{diurnal_shape, synthesize_traffic, SyntheticConfig, DEFAULT_START_MS};
pub use tensor_file::{read_series_cache, write_series_cache, Precision, SeriesManifest, TensorFile};
