use std::sync::Arc;

use crate::error::{Error, Result};

use super::grid::TimeGrid;

/// A `d`-dimensional path sampled on a [`TimeGrid`], read as piecewise linear
/// between samples. Values are stored row-major, one row per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: Arc<TimeGrid>,
    dim: usize,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: Arc<TimeGrid>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("path dimension must be at least 1"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::invalid(format!(
                "path has {} values, expected {} rows x {} columns",
                values.len(),
                grid.len(),
                dim
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite path value at row {}, column {}", pos / dim, pos % dim)));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: Arc<TimeGrid>, dim: usize) -> Self {
        assert!(dim > 0, "path dimension must be at least 1");
        let values = vec![0.0; grid.len() * dim];
        Self { grid, dim, values }
    }

    /// Constant path equal to `value` at every grid point.
    pub fn constant(grid: Arc<TimeGrid>, value: &[f64]) -> Result<Self> {
        let values = value.iter().copied().cycle().take(grid.len() * value.len()).collect();
        Self::new(grid, value.len(), values)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.dim + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// `x_{n+1} - x_n` written into `out`.
    pub fn increment_into(&self, n: usize, out: &mut [f64]) {
        let (a, b) = (self.row(n), self.row(n + 1));
        for ((o, x0), x1) in out.iter_mut().zip(a).zip(b) {
            *o = x1 - x0;
        }
    }

    pub fn increments(&self) -> Vec<Vec<f64>> {
        (0..self.grid.steps())
            .map(|n| {
                let mut inc = vec![0.0; self.dim];
                self.increment_into(n, &mut inc);
                inc
            })
            .collect()
    }

    /// Same grid, values mapped elementwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Path> {
        Path::new(self.grid.clone(), self.dim, self.values.iter().map(|&v| f(v)).collect())
    }

    /// True when both paths are sampled at identical times.
    pub fn same_grid(&self, other: &Path) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.times() == other.grid.times()
    }

    /// The path run backwards in time on the mirrored grid.
    pub fn reversed(&self) -> Path {
        let t_end = self.grid.t_end();
        let times: Vec<f64> = self.grid.times().iter().rev().map(|&t| t_end - t).collect();
        let grid = Arc::new(TimeGrid::new(times).expect("mirrored grid is valid"));
        let values = self.rows().rev().flat_map(|r| r.iter().copied()).collect();
        Path { grid, dim: self.dim, values }
    }
}

/// Prepends the grid times as the first component: `[t, x_t]`.
pub fn time_augment(noise: &Path) -> Path {
    let d = noise.dim() + 1;
    let mut values = Vec::with_capacity(noise.len() * d);
    for (t, row) in noise.times().iter().zip(noise.rows()) {
        values.push(*t);
        values.extend_from_slice(row);
    }
    Path { grid: noise.grid.clone(), dim: d, values }
}

/// Componentwise transforms used to build positive or switched controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathTransform {
    Square,
    /// `scale * 1{value > level}`
    ThresholdStep {
        level: f64,
        scale: f64,
    },
}

impl PathTransform {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            PathTransform::Square => v * v,
            PathTransform::ThresholdStep { level, scale } => {
                if v > level {
                    scale
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn transform_path(p: &Path, transform: PathTransform) -> Result<Path> {
    p.map(|v| transform.apply(v))
}
