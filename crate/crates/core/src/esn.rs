//! Echo state network baseline: a fixed random leaky-tanh recurrence whose
//! states feed the same ridge readout as the randomized signature.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::paths::Path;
use crate::rng::{SeedStream, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsnParams {
    pub size: usize,
    pub spectral_radius: f64,
    /// Leak rate `α ∈ (0, 1]`.
    pub leak_rate: f64,
    pub input_scaling: f64,
    pub seed: u64,
    /// Leading states excluded from training rows.
    pub washout: usize,
}

impl EsnParams {
    /// Size 50, spectral radius 0.7, leak rate 0.4.
    pub fn baseline(seed: u64) -> Self {
        Self { size: 50, spectral_radius: 0.7, leak_rate: 0.4, input_scaling: 1.0, seed, washout: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("ESN size must be at least 1"));
        }
        if !(self.spectral_radius.is_finite() && self.spectral_radius > 0.0) {
            return Err(Error::invalid(format!("spectral radius must be positive, got {}", self.spectral_radius)));
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return Err(Error::invalid(format!("leak rate must lie in (0, 1], got {}", self.leak_rate)));
        }
        if !self.input_scaling.is_finite() {
            return Err(Error::invalid("input scaling must be finite"));
        }
        Ok(())
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Esn {
    params: EsnParams,
    input_dim: usize,
    recurrent: DMatrix<f64>,
    input: DMatrix<f64>,
}

impl Esn {
    /// Dense standard-normal `W` rescaled to the requested spectral radius and
    /// standard-normal `W_in` times `input_scaling`.
    pub fn new(params: EsnParams, input_dim: usize) -> Result<Self> {
        params.validate()?;
        if input_dim == 0 {
            return Err(Error::invalid("ESN input dimension must be at least 1"));
        }
        let n = params.size;
        let mut rng = SeedStream::new(params.seed).rng(Stream::Esn, 0);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut w = DMatrix::from_fn(n, n, |_, _| draw());
        let input = DMatrix::from_fn(n, input_dim, |_, _| draw()) * params.input_scaling;
        let rho = spectral_radius(&w);
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::numeric("random recurrent matrix has zero spectral radius"));
        }
        w *= params.spectral_radius / rho;
        Ok(Self { params, input_dim, recurrent: w, input })
    }

    pub fn params(&self) -> &EsnParams {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn recurrent(&self) -> &DMatrix<f64> {
        &self.recurrent
    }

    pub fn input_weights(&self) -> &DMatrix<f64> {
        &self.input
    }

    /// States with `h_0` given and, for `n >= 1`,
    /// `h_n = (1 - α) h_{n-1} + α tanh(W h_{n-1} + W_in x_{t_n})`.
    pub fn evolve_from(&self, x: &Path, h0: &DVector<f64>) -> Result<Path> {
        if x.dim() != self.input_dim {
            return Err(Error::invalid(format!("ESN expects {}-dimensional input, got {}", self.input_dim, x.dim())));
        }
        if h0.len() != self.params.size {
            return Err(Error::invalid("initial ESN state has the wrong size"));
        }
        let alpha = self.params.leak_rate;
        let mut h = h0.clone();
        let mut pre = DVector::zeros(self.params.size);
        let mut values = Vec::with_capacity(x.len() * self.params.size);
        values.extend(h.iter());
        for n in 1..x.len() {
            let xn = DVector::from_column_slice(x.row(n));
            pre.gemv(1.0, &self.input, &xn, 0.0);
            pre.gemv(1.0, &self.recurrent, &h, 1.0);
            for (hv, &p) in h.iter_mut().zip(pre.iter()) {
                *hv = (1.0 - alpha) * *hv + alpha * p.tanh();
            }
            values.extend(h.iter());
        }
        Path::new(Arc::clone(x.grid()), self.params.size, values)
    }

    /// State trajectory from `h_0 = 0`.
    pub fn evolve(&self, x: &Path) -> Result<Path> {
        self.evolve_from(x, &DVector::zeros(self.params.size))
    }
}
