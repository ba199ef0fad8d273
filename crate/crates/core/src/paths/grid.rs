use rand::Rng;

use crate::error::{Error, Result};

/// Strictly increasing sample times starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Validates `times`: at least two points, `times[0] == 0`, strictly
    /// increasing and finite.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid(format!("a time grid needs at least two points, got {}", times.len())));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid(format!("grid must start at 0, starts at {}", times[0])));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(Error::invalid(format!(
                    "grid not strictly increasing at index {}: {} -> {}",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of points, `N + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// A valid grid always has at least two points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn step(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    pub fn is_regular(&self, tol: f64) -> bool {
        let h = self.t_end() / self.steps() as f64;
        (0..self.steps()).all(|n| (self.step(n) - h).abs() <= tol * h)
    }
}

/// `steps + 1` equally spaced points on `[0, t_end]`.
pub fn regular_grid(t_end: f64, steps: usize) -> Result<TimeGrid> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid(format!("grid horizon must be positive, got {t_end}")));
    }
    if steps == 0 {
        return Err(Error::invalid("grid needs at least one step"));
    }
    let h = t_end / steps as f64;
    let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    times[steps] = t_end;
    TimeGrid::new(times)
}

/// Random partition of `[0, 1]` with `points` entries: both endpoints plus
/// `points - 2` sorted uniforms pushed through `s -> (1 - e^{-s}) / (1 - e^{-1})`.
pub fn irregular_grid<R: Rng + ?Sized>(points: usize, rng: &mut R) -> Result<TimeGrid> {
    if points < 3 {
        return Err(Error::invalid(format!("irregular grid needs at least 3 points, got {points}")));
    }
    let norm = 1.0 - (-1.0f64).exp();
    loop {
        let mut s: Vec<f64> = (0..points - 2).map(|_| rng.random::<f64>()).collect();
        s.sort_by(f64::total_cmp);
        let mut times = Vec::with_capacity(points);
        times.push(0.0);
        times.extend(s.iter().map(|&s| (1.0 - (-s).exp()) / norm));
        times.push(1.0);
        // Ties and draws of exactly 0 have probability zero but are possible in f64.
        if let Ok(grid) = TimeGrid::new(times) {
            if grid.times()[points - 2] < 1.0 {
                return Ok(grid);
            }
        }
    }
}
