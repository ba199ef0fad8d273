//! Randomized signature reservoir.
//!
//! The reservoir state solves `dZ = Σ_i σ(A_i Z + b_i) dX^i`, `Z_0 = z0`, with
//! i.i.d. standard normal `A_i`, `b_i`, `z0`, discretised by explicit Euler on
//! the control's own grid:
//!
//! ```text
//! Z_{t_n} = Z_{t_{n-1}} + Σ_i σ(A_i Z_{t_{n-1}} + b_i) (X^i_{t_n} - X^i_{t_{n-1}})
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::paths::Path;
use crate::rng::{SeedStream, Stream};

/// Elementwise activation applied to `A_i Z + b_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    ScaledIdentity { slope: f64 },
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn scaled_identity(slope: f64) -> Result<Self> {
        let a = Activation::ScaledIdentity { slope };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if let Activation::ScaledIdentity { slope } = *self {
            if !(slope.is_finite() && slope > 0.0) {
                return Err(Error::invalid(format!("activation slope must be positive and finite, got {slope}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            Activation::ScaledIdentity { slope } => slope * u,
            Activation::Tanh => u.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-u).exp()),
        }
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            Activation::ScaledIdentity { .. } => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub(crate) fn slope(&self) -> f64 {
        match *self {
            Activation::ScaledIdentity { slope } => slope,
            _ => 0.0,
        }
    }

    pub(crate) fn from_tag(tag: u8, slope: f64) -> Result<Self> {
        let a = match tag {
            0 => Activation::ScaledIdentity { slope },
            1 => Activation::Tanh,
            2 => Activation::Sigmoid,
            other => return Err(Error::format(format!("unknown activation tag {other}"))),
        };
        a.validate().map_err(|e| Error::format(e.to_string()))?;
        Ok(a)
    }
}

/// Linear activation with slope `1 / (d √k)`, which keeps the growth of the
/// state independent of `d` and `k`.
pub fn default_activation(k: usize, d: usize) -> Activation {
    assert!(k > 0 && d > 0, "reservoir sizes must be positive");
    Activation::ScaledIdentity { slope: 1.0 / (d as f64 * (k as f64).sqrt()) }
}

/// Random parameters `A_1..A_d`, `b_1..b_d`, `z0` and the activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    k: usize,
    d: usize,
    seed: u64,
    activation: Activation,
    /// `A_1; ...; A_d` stacked vertically, `(d k) x k`.
    weights: DMatrix<f64>,
    /// `b_1; ...; b_d`, length `d k`.
    biases: DVector<f64>,
    z0: DVector<f64>,
}

impl Reservoir {
    /// Draws every entry i.i.d. standard normal from `seed`, in the order
    /// `A_1` (row-major), ..., `A_d`, `b_1`, ..., `b_d`, `z0`.
    pub fn generate(k: usize, d: usize, activation: Activation, seed: u64) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::invalid(format!("reservoir needs k >= 1 and d >= 1, got k={k}, d={d}")));
        }
        activation.validate()?;
        let mut rng = SeedStream::new(seed).rng(Stream::Reservoir, 0);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut weights = DMatrix::zeros(d * k, k);
        for i in 0..d {
            for r in 0..k {
                for c in 0..k {
                    weights[(i * k + r, c)] = draw();
                }
            }
        }
        let biases = DVector::from_fn(d * k, |_, _| draw());
        let z0 = DVector::from_fn(k, |_, _| draw());
        Ok(Self { k, d, seed, activation, weights, biases, z0 })
    }

    pub fn from_parts(
        k: usize,
        d: usize,
        seed: u64,
        activation: Activation,
        weights: DMatrix<f64>,
        biases: DVector<f64>,
        z0: DVector<f64>,
    ) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::invalid("reservoir needs k >= 1 and d >= 1"));
        }
        activation.validate()?;
        if weights.shape() != (d * k, k) || biases.len() != d * k || z0.len() != k {
            return Err(Error::invalid("reservoir parameter shapes do not match (k, d)"));
        }
        if !weights.iter().chain(biases.iter()).chain(z0.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("reservoir parameters must be finite"));
        }
        Ok(Self { k, d, seed, activation, weights, biases, z0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn matrix(&self, i: usize) -> DMatrixView<'_, f64> {
        self.weights.rows(i * self.k, self.k)
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        &self.biases.as_slice()[i * self.k..(i + 1) * self.k]
    }

    pub fn z0(&self) -> &DVector<f64> {
        &self.z0
    }

    pub(crate) fn stacked_weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub(crate) fn stacked_biases(&self) -> &DVector<f64> {
        &self.biases
    }

    fn check_control(&self, x: &Path) -> Result<()> {
        if x.dim() != self.d {
            return Err(Error::invalid(format!(
                "reservoir built for {}-dimensional controls, got {}",
                self.d,
                x.dim()
            )));
        }
        Ok(())
    }

    /// Reservoir trajectory `Z` on the control's grid.
    pub fn evolve(&self, x: &Path) -> Result<Path> {
        self.check_control(x)?;
        let (k, d) = (self.k, self.d);
        let mut z = self.z0.clone();
        let mut u = DVector::zeros(d * k);
        let mut dx = vec![0.0; d];
        let mut values = Vec::with_capacity(x.len() * k);
        values.extend(z.iter());
        for n in 0..x.grid().steps() {
            x.increment_into(n, &mut dx);
            u.copy_from(&self.biases);
            u.gemv(1.0, &self.weights, &z, 1.0);
            for (i, &dxi) in dx.iter().enumerate() {
                let ui = &u.as_slice()[i * k..(i + 1) * k];
                for (zr, &v) in z.iter_mut().zip(ui) {
                    *zr += self.activation.apply(v) * dxi;
                }
            }
            if !z.iter().all(|v| v.is_finite()) {
                return Err(Error::numeric(format!("reservoir state became non-finite at step {}", n + 1)));
            }
            values.extend(z.iter());
        }
        Path::new(Arc::clone(x.grid()), k, values)
    }

    /// Evolves several controls of equal length together, one matrix product
    /// per time step. Agrees with [`Reservoir::evolve`] up to rounding.
    pub fn evolve_batch(&self, xs: &[&Path]) -> Result<Vec<Path>> {
        let Some(first) = xs.first() else {
            return Ok(Vec::new());
        };
        let len = first.len();
        for x in xs {
            self.check_control(x)?;
            if x.len() != len {
                return Err(Error::invalid("batched controls must share the grid length"));
            }
        }
        let (k, d, b) = (self.k, self.d, xs.len());
        let mut z = DMatrix::from_fn(k, b, |r, _| self.z0[r]);
        let mut u = DMatrix::zeros(d * k, b);
        let mut outputs: Vec<Vec<f64>> = (0..b).map(|_| Vec::with_capacity(len * k)).collect();
        for (c, out) in outputs.iter_mut().enumerate() {
            out.extend(z.column(c).iter());
        }
        let mut dx = vec![0.0; d];
        for n in 0..len - 1 {
            u.gemm(1.0, &self.weights, &z, 0.0);
            for (c, x) in xs.iter().enumerate() {
                x.increment_into(n, &mut dx);
                let ucol = u.column(c);
                let ucol = ucol.as_slice();
                let mut zcol = z.column_mut(c);
                let zcol = zcol.as_mut_slice();
                for (i, &dxi) in dx.iter().enumerate() {
                    let ui = &ucol[i * k..(i + 1) * k];
                    let bi = &self.biases.as_slice()[i * k..(i + 1) * k];
                    for ((zr, &v), &bv) in zcol.iter_mut().zip(ui).zip(bi) {
                        *zr += self.activation.apply(v + bv) * dxi;
                    }
                }
                if !zcol.iter().all(|v| v.is_finite()) {
                    return Err(Error::numeric(format!(
                        "reservoir state of batch member {c} became non-finite at step {}",
                        n + 1
                    )));
                }
                outputs[c].extend_from_slice(zcol);
            }
        }
        xs.iter().zip(outputs).map(|(x, values)| Path::new(Arc::clone(x.grid()), k, values)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{regular_grid, sample_brownian, time_augment, TimeGrid};

    fn grid(n: usize) -> Arc<TimeGrid> {
        Arc::new(regular_grid(1.0, n).unwrap())
    }

    #[test]
    fn default_slopes() {
        assert_eq!(default_activation(100, 2), Activation::ScaledIdentity { slope: 0.05 });
        assert_eq!(default_activation(1, 1), Activation::ScaledIdentity { slope: 1.0 });
        match default_activation(50, 2) {
            Activation::ScaledIdentity { slope } => assert!((slope - 0.070_710_678_118_654_75).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn activation_validation() {
        assert!(Activation::scaled_identity(0.0).is_err());
        assert!(Activation::scaled_identity(f64::INFINITY).is_err());
        assert!(Activation::from_tag(9, 1.0).is_err());
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    }

    #[test]
    fn generated_shapes_and_determinism() {
        let a = Reservoir::generate(100, 2, default_activation(100, 2), 11).unwrap();
        assert_eq!(a.matrix(0).shape(), (100, 100));
        assert_eq!(a.matrix(1).shape(), (100, 100));
        assert_eq!(a.bias(1).len(), 100);
        assert_eq!(a.z0().len(), 100);
        let b = Reservoir::generate(100, 2, default_activation(100, 2), 11).unwrap();
        assert_eq!(a, b);
        let c = Reservoir::generate(100, 2, default_activation(100, 2), 12).unwrap();
        assert_ne!(a, c);
        assert!(Reservoir::generate(0, 2, Activation::Tanh, 0).is_err());
    }

    #[test]
    fn constant_control_keeps_initial_state() {
        let r = Reservoir::generate(5, 2, Activation::Tanh, 3).unwrap();
        let x = Path::constant(grid(10), &[0.3, -1.0]).unwrap();
        let z = r.evolve(&x).unwrap();
        for row in z.rows() {
            assert_eq!(row, r.z0().as_slice());
        }
    }

    #[test]
    fn zero_matrix_unit_bias_integrates_control() {
        let r = Reservoir::from_parts(
            1,
            1,
            0,
            Activation::ScaledIdentity { slope: 1.0 },
            DMatrix::zeros(1, 1),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.25),
        )
        .unwrap();
        let x = Path::new(grid(3), 1, vec![1.0, 1.5, 0.5, 2.0]).unwrap();
        let z = r.evolve(&x).unwrap();
        for n in 0..4 {
            assert!((z.get(n, 0) - (0.25 + x.get(n, 0) - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let r = Reservoir::generate(3, 2, Activation::Tanh, 0).unwrap();
        assert!(matches!(r.evolve(&Path::zeros(grid(2), 3)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn overflow_is_reported_with_step() {
        let r = Reservoir::from_parts(
            1,
            1,
            0,
            Activation::ScaledIdentity { slope: 1.0 },
            DMatrix::from_element(1, 1, 1e200),
            DVector::zeros(1),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let x = Path::new(grid(3), 1, vec![0.0, 1e200, 2e200, 3e200]).unwrap();
        match r.evolve(&x) {
            Err(Error::NumericFailure(msg)) => assert!(msg.contains("step 1"), "{msg}"),
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }

    #[test]
    fn batch_matches_single() {
        let g = grid(30);
        let r = Reservoir::generate(7, 3, default_activation(7, 3), 4).unwrap();
        let seeds = SeedStream::new(8);
        let xs: Vec<Path> =
            (0..5).map(|i| time_augment(&sample_brownian(&g, 2, &mut seeds.rng(Stream::Misc, i)).unwrap())).collect();
        let refs: Vec<&Path> = xs.iter().collect();
        let batch = r.evolve_batch(&refs).unwrap();
        for (x, zb) in xs.iter().zip(&batch) {
            let zs = r.evolve(x).unwrap();
            for (a, b) in zs.values().iter().zip(zb.values()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
        assert!(r.evolve_batch(&[]).unwrap().is_empty());
    }
}
