//! Ground-truth simulators for the controlled systems used in the experiments.
//!
//! SDEs are stepped with explicit Euler–Maruyama directly on the observation
//! grid, driven by the increments of a supplied noise path. The enzyme ODE is
//! stiff enough at `k1 = 30` to need internal sub-steps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::paths::Path;

/// Fractional Ornstein–Uhlenbeck: `dY = Θ(μ - Y) dt + Σ dB^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct FouParams {
    pub mu: DVector<f64>,
    pub theta: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub y0: DVector<f64>,
}

impl FouParams {
    pub fn new(mu: DVector<f64>, theta: DMatrix<f64>, sigma: DMatrix<f64>, y0: DVector<f64>) -> Result<Self> {
        let m = mu.len();
        if m == 0 {
            return Err(Error::invalid("fOU dimension must be at least 1"));
        }
        if theta.shape() != (m, m) || sigma.shape() != (m, m) || y0.len() != m {
            return Err(Error::invalid(format!(
                "fOU shapes disagree: mu {m}, theta {:?}, sigma {:?}, y0 {}",
                theta.shape(),
                sigma.shape(),
                y0.len()
            )));
        }
        let finite = mu.iter().chain(theta.iter()).chain(sigma.iter()).chain(y0.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("fOU parameters must be finite"));
        }
        Ok(Self { mu, theta, sigma, y0 })
    }

    pub fn scalar(mu: f64, theta: f64, sigma: f64, y0: f64) -> Result<Self> {
        let p = Self::new(
            DVector::from_element(1, mu),
            DMatrix::from_element(1, 1, theta),
            DMatrix::from_element(1, 1, sigma),
            DVector::from_element(1, y0),
        )?;
        p.check_preset_spectra()?;
        Ok(p)
    }

    /// `[Θ]_ij = i / j` (1-indexed), `Σ = I`, `μ = 1`, `y0 = 1`.
    pub fn ratio_preset(m: usize) -> Result<Self> {
        let theta = DMatrix::from_fn(m, m, |i, j| (i + 1) as f64 / (j + 1) as f64);
        let p =
            Self::new(DVector::from_element(m, 1.0), theta, DMatrix::identity(m, m), DVector::from_element(m, 1.0))?;
        p.check_preset_spectra()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Θ and Σ have real, nonnegative spectra. The ratio preset is rank one
    /// and not symmetric, so this is the check applied to presets.
    pub fn check_preset_spectra(&self) -> Result<()> {
        for (name, mat) in [("theta", &self.theta), ("sigma", &self.sigma)] {
            let scale = mat.amax().max(1.0) * 1e-9 * mat.nrows() as f64;
            for ev in mat.complex_eigenvalues().iter() {
                if ev.re < -scale || ev.im.abs() > scale {
                    return Err(Error::invalid(format!("{name} has eigenvalue {ev} outside [0, inf)")));
                }
            }
        }
        Ok(())
    }

    /// Symmetric positive semi-definite check for user-supplied matrices.
    pub fn check_symmetric_psd(&self) -> Result<()> {
        for (name, mat) in [("theta", &self.theta), ("sigma", &self.sigma)] {
            let tol = mat.amax().max(1.0) * 1e-12;
            if (mat - mat.transpose()).amax() > tol {
                return Err(Error::invalid(format!("{name} is not symmetric")));
            }
            let min = mat.clone().symmetric_eigen().eigenvalues.min();
            if min < -tol * mat.nrows() as f64 {
                return Err(Error::invalid(format!("{name} has negative eigenvalue {min}")));
            }
        }
        Ok(())
    }
}

fn check_noise(noise: &Path, dim: usize, what: &str) -> Result<()> {
    if noise.dim() != dim {
        return Err(Error::invalid(format!("{what} expects {dim}-dimensional noise, got {}", noise.dim())));
    }
    Ok(())
}

/// Euler–Maruyama: `Y_{n+1} = Y_n + Θ(μ - Y_n)Δt_n + Σ ΔB_n`, `Y_0 = y0`.
pub fn simulate_fou(p: &FouParams, noise: &Path) -> Result<Path> {
    let m = p.dim();
    check_noise(noise, m, "fOU")?;
    let grid = noise.grid();
    let mut values = Vec::with_capacity(grid.len() * m);
    let mut y = p.y0.clone();
    values.extend(y.iter());
    let mut db = DVector::zeros(m);
    for n in 0..grid.steps() {
        let dt = grid.step(n);
        noise.increment_into(n, db.as_mut_slice());
        let drift = &p.theta * (&p.mu - &y);
        y += drift * dt + &p.sigma * &db;
        values.extend(y.iter());
    }
    Path::new(grid.clone(), m, values).map_err(|e| Error::numeric(format!("fOU trajectory diverged: {e}")))
}

/// Double-well Langevin: `dY = θY(μ - Y²) dt + σ dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinParams {
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    pub y0: f64,
}

impl LangevinParams {
    pub fn new(mu: f64, theta: f64, sigma: f64, y0: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0 && sigma.is_finite() && sigma > 0.0 && mu.is_finite() && y0.is_finite()) {
            return Err(Error::invalid(format!(
                "Langevin needs theta > 0, sigma > 0 and finite mu, y0 (got theta {theta}, sigma {sigma})"
            )));
        }
        Ok(Self { mu, theta, sigma, y0 })
    }

    /// Same as [`LangevinParams::new`] but allows `sigma = 0` for deterministic checks.
    pub fn deterministic(mu: f64, theta: f64, y0: f64) -> Self {
        Self { mu, theta, sigma: 0.0, y0 }
    }
}

pub fn simulate_langevin(p: &LangevinParams, noise: &Path) -> Result<Path> {
    check_noise(noise, 1, "Langevin")?;
    let grid = noise.grid();
    let mut values = Vec::with_capacity(grid.len());
    let mut y = p.y0;
    values.push(y);
    for n in 0..grid.steps() {
        let dt = grid.step(n);
        let dw = noise.get(n + 1, 0) - noise.get(n, 0);
        y += p.theta * y * (p.mu - y * y) * dt + p.sigma * dw;
        values.push(y);
    }
    Path::new(grid.clone(), 1, values).map_err(|e| Error::numeric(format!("Langevin trajectory diverged: {e}")))
}

/// Michaelis–Menten kinetics with substrate injection:
///
/// ```text
/// dS = (k₋₁C - k₁S(1 - C)) dt + X dt
/// dC = -(k₋₁C - k₁S(1 - C)) dt - k₂C dt
/// dY = k₂C dt
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnzymeParams {
    pub k1: f64,
    pub k_neg1: f64,
    pub k2: f64,
    pub s0: f64,
    pub c0: f64,
    pub y0: f64,
    /// Explicit Euler sub-steps per grid interval.
    pub substeps: usize,
}

impl EnzymeParams {
    pub const DEFAULT_SUBSTEPS: usize = 10;

    pub fn new(k1: f64, k_neg1: f64, k2: f64, initial: (f64, f64, f64)) -> Result<Self> {
        let p = Self { k1, k_neg1, k2, s0: initial.0, c0: initial.1, y0: initial.2, substeps: Self::DEFAULT_SUBSTEPS };
        p.validate()?;
        Ok(p)
    }

    /// Rates `(30, 1, 10)` from an empty reactor.
    pub fn standard() -> Self {
        Self::new(30.0, 1.0, 10.0, (0.0, 0.0, 0.0)).expect("standard rates are valid")
    }

    pub fn with_substeps(mut self, substeps: usize) -> Result<Self> {
        self.substeps = substeps;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k_neg1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::invalid("enzyme rate constants must be positive"));
        }
        for (name, v) in [("S0", self.s0), ("C0", self.c0), ("Y0", self.y0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.substeps == 0 {
            return Err(Error::invalid("enzyme simulation needs at least one sub-step"));
        }
        Ok(())
    }
}

/// Full `(S, C, Y)` state trajectory on the control's grid. The control is
/// interpolated linearly inside each grid interval.
pub fn simulate_enzyme_state(p: &EnzymeParams, control: &Path) -> Result<Path> {
    p.validate()?;
    check_noise(control, 1, "enzyme")?;
    if let Some(n) = control.values().iter().position(|&v| v < 0.0) {
        return Err(Error::invalid(format!("enzyme control is negative at grid index {n}")));
    }
    let grid = control.grid();
    let mut values = Vec::with_capacity(grid.len() * 3);
    let (mut s, mut c, mut y) = (p.s0, p.c0, p.y0);
    values.extend([s, c, y]);
    let sub = p.substeps as f64;
    for n in 0..grid.steps() {
        let h = grid.step(n) / sub;
        let (x0, x1) = (control.get(n, 0), control.get(n + 1, 0));
        for j in 0..p.substeps {
            let x = x0 + (x1 - x0) * (j as f64 / sub);
            let binding = p.k_neg1 * c - p.k1 * s * (1.0 - c);
            let ds = binding + x;
            let dc = -binding - p.k2 * c;
            let dy = p.k2 * c;
            s += ds * h;
            c += dc * h;
            y += dy * h;
        }
        values.extend([s, c, y]);
    }
    Path::new(grid.clone(), 3, values).map_err(|e| Error::numeric(format!("enzyme trajectory diverged: {e}")))
}

/// Product concentration `Y` only.
pub fn simulate_enzyme(p: &EnzymeParams, control: &Path) -> Result<Path> {
    let state = simulate_enzyme_state(p, control)?;
    Path::new(state.grid().clone(), 1, state.column(2))
}

/// Adds i.i.d. `N(0, variance)` noise to every value.
pub fn add_observation_noise<R: Rng + ?Sized>(y: &Path, variance: f64, rng: &mut R) -> Result<Path> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::invalid(format!("noise variance must be nonnegative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(y.clone());
    }
    let sd = variance.sqrt();
    let values = y.values().iter().map(|&v| v + sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Path::new(y.grid().clone(), y.dim(), values)
}
