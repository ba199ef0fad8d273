//! Time grids, sampled paths and the stochastic drivers built on them.

mod csv_io;
mod grid;
mod path;
mod sample;

pub use csv_io::{read_path_csv, write_path_csv, PathCsvKind};
pub use grid::{irregular_grid, regular_grid, TimeGrid};
pub use path::{time_augment, transform_path, Path, PathTransform};
pub use sample::{fbm_covariance, sample_brownian, sample_fbm, FbmSampler, FbmSpec};
