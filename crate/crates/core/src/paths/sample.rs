//! Gaussian driving noise: Brownian motion and exact fractional Brownian motion.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::grid::TimeGrid;
use super::path::Path;

/// `dim` independent Brownian components started at zero.
pub fn sample_brownian<R: Rng + ?Sized>(grid: &Arc<TimeGrid>, dim: usize, rng: &mut R) -> Result<Path> {
    if dim == 0 {
        return Err(Error::invalid("Brownian dimension must be at least 1"));
    }
    let mut values = vec![0.0; grid.len() * dim];
    for n in 0..grid.steps() {
        let sd = grid.step(n).sqrt();
        for j in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            values[(n + 1) * dim + j] = values[n * dim + j] + sd * z;
        }
    }
    Path::new(grid.clone(), dim, values)
}

/// Fractional Brownian motion settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmSpec {
    pub hurst: f64,
    pub dim: usize,
    /// When false every component carries the same sample.
    pub independent: bool,
}

impl FbmSpec {
    pub fn new(hurst: f64, dim: usize) -> Result<Self> {
        let spec = Self { hurst, dim, independent: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::invalid(format!("Hurst parameter must lie in (0, 1), got {}", self.hurst)));
        }
        if self.dim == 0 {
            return Err(Error::invalid("fBm dimension must be at least 1"));
        }
        Ok(())
    }
}

/// Covariance of fractional Brownian motion, `(s^2H + t^2H - |t - s|^2H) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
}

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-8;

/// Cholesky factor of the fBm covariance on one grid, reusable across samples.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: Arc<TimeGrid>,
    hurst: f64,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl FbmSampler {
    /// Factorises the covariance of `B_{t_1}, ..., B_{t_N}` (`B_0 = 0`). A
    /// diagonal jitter, relative to the largest variance, starts at 1e-12 and
    /// grows tenfold up to 1e-8 if the plain factorisation fails.
    pub fn new(grid: Arc<TimeGrid>, hurst: f64) -> Result<Self> {
        FbmSpec::new(hurst, 1)?;
        let t = &grid.times()[1..];
        let n = t.len();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(t[i], t[j], hurst));
        let scale = t[n - 1].powf(2.0 * hurst);

        let mut jitter = 0.0;
        loop {
            let mut m = cov.clone();
            for i in 0..n {
                m[(i, i)] += jitter * scale;
            }
            if let Some(chol) = Cholesky::<f64, Dyn>::new(m) {
                return Ok(Self { grid, hurst, factor: chol.unpack(), jitter });
            }
            jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
            if jitter > JITTER_MAX * 1.000_001 {
                return Err(Error::numeric(format!(
                    "fBm covariance (H = {hurst}, {n} points) is not positive definite even with jitter {JITTER_MAX:e}"
                )));
            }
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Relative diagonal jitter that was needed, 0 if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.factor.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * z
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, independent: bool, rng: &mut R) -> Result<Path> {
        if dim == 0 {
            return Err(Error::invalid("fBm dimension must be at least 1"));
        }
        let len = self.grid.len();
        let mut values = vec![0.0; len * dim];
        let mut shared = None;
        for j in 0..dim {
            let comp = if independent {
                self.sample_component(rng)
            } else {
                shared.get_or_insert_with(|| self.sample_component(rng)).clone()
            };
            for (n, v) in comp.iter().enumerate() {
                values[(n + 1) * dim + j] = *v;
            }
        }
        Path::new(self.grid.clone(), dim, values)
    }
}

/// Exact fBm sample on `grid` via Cholesky factorisation of its covariance.
pub fn sample_fbm<R: Rng + ?Sized>(grid: &Arc<TimeGrid>, spec: &FbmSpec, rng: &mut R) -> Result<Path> {
    spec.validate()?;
    FbmSampler::new(grid.clone(), spec.hurst)?.sample(spec.dim, spec.independent, rng)
}
