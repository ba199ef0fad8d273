//! Ridge readout: stacking, regularised least squares, prediction and errors.
//!
//! `β̂ = argmin ‖Y - Zβ‖² + λ‖β‖²` is solved from the normal equations
//! `(ZᵀZ + λI)β = ZᵀY` when there are at least as many rows as features, and
//! from the equivalent dual system `(ZZᵀ + λI)α = Y`, `β = Zᵀα` otherwise.
//! Both go through a Cholesky factorisation first and a spectral
//! pseudo-inverse if that fails. Every returned fit satisfies the normal
//! equations to [`RESIDUAL_TOLERANCE`].

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::paths::Path;

/// Bound on `‖(ZᵀZ + λI)β̂ - ZᵀY‖ / ‖ZᵀY‖`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Pivot ratio below which an unregularised factorisation counts as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// Linear map from features to outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    beta: DMatrix<f64>,
    lambda: f64,
}

impl ReadoutModel {
    pub fn new(beta: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
        }
        if beta.nrows() == 0 || beta.ncols() == 0 {
            return Err(Error::invalid("readout needs at least one feature and one output"));
        }
        if !beta.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("readout coefficients must be finite"));
        }
        Ok(Self { beta, lambda })
    }

    /// `k x m` coefficient matrix.
    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn feature_dim(&self) -> usize {
        self.beta.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.beta.ncols()
    }

    /// Number of trainable coefficients.
    pub fn parameter_count(&self) -> usize {
        self.beta.len()
    }

    /// `Ȳ = Z̄ β̂`, row by row on the feature path's grid.
    pub fn predict(&self, features: &Path) -> Result<Path> {
        if features.dim() != self.feature_dim() {
            return Err(Error::invalid(format!(
                "readout expects {} features, got {}",
                self.feature_dim(),
                features.dim()
            )));
        }
        let z = DMatrix::from_row_slice(features.len(), features.dim(), features.values());
        let y = z * &self.beta;
        let values = row_major(&y);
        Path::new(Arc::clone(features.grid()), self.output_dim(), values)
            .map_err(|e| Error::numeric(format!("prediction is not finite: {e}")))
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter());
    }
    out
}

/// Trajectory-major stacking of feature and target rows: trajectory 1 at
/// `t_0..t_N`, then trajectory 2, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedDesign {
    pub z: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub trajectory_len: usize,
}

impl StackedDesign {
    pub fn rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.ncols()
    }
}

/// Stacks `(features, targets)` pairs into one design.
pub fn stack(trajectories: &[(Path, Path)]) -> Result<StackedDesign> {
    let Some((f0, y0)) = trajectories.first() else {
        return Err(Error::invalid("nothing to stack"));
    };
    let (len, k, m) = (f0.len(), f0.dim(), y0.dim());
    for (i, (f, y)) in trajectories.iter().enumerate() {
        if f.len() != len || y.len() != len || f.dim() != k || y.dim() != m {
            return Err(Error::invalid(format!(
                "trajectory {i} is ragged: features {}x{}, targets {}x{}, expected {len}x{k} and {len}x{m}",
                f.len(),
                f.dim(),
                y.len(),
                y.dim()
            )));
        }
    }
    let rows = len * trajectories.len();
    let mut zv = Vec::with_capacity(rows * k);
    let mut yv = Vec::with_capacity(rows * m);
    for (f, y) in trajectories {
        zv.extend_from_slice(f.values());
        yv.extend_from_slice(y.values());
    }
    Ok(StackedDesign {
        z: DMatrix::from_row_slice(rows, k, &zv),
        y: DMatrix::from_row_slice(rows, m, &yv),
        trajectory_len: len,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be nonnegative and finite, got {lambda}")));
    }
    Ok(())
}

fn singular_error() -> Error {
    Error::numeric("normal equations are singular at lambda = 0; use lambda > 0")
}

fn relative_residual(residual: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    let rn = residual.norm();
    let bn = rhs.norm();
    if bn == 0.0 {
        rn
    } else {
        rn / bn
    }
}

/// Cholesky solve of `a x = b` with two rounds of iterative refinement.
/// `None` when the factorisation fails or, for `strict`, when the pivots
/// indicate numerical singularity.
fn cholesky_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, strict: bool) -> Option<DMatrix<f64>> {
    let chol = Cholesky::<f64, Dyn>::new(a.clone())?;
    if strict {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = (diag.min(), diag.max());
        if lo.is_nan() || lo <= 0.0 || (lo / hi).powi(2) < SINGULAR_PIVOT_RATIO {
            return None;
        }
    }
    let mut x = chol.solve(b);
    for _ in 0..2 {
        let r = b - a * &x;
        if relative_residual(&r, b) <= RESIDUAL_TOLERANCE * 1e-3 {
            break;
        }
        x += chol.solve(&r);
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Accumulated `ZᵀZ` and `ZᵀY`, for designs too large to hold in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    rows: usize,
}

impl NormalEquations {
    pub fn new(feature_dim: usize, output_dim: usize) -> Self {
        Self { gram: DMatrix::zeros(feature_dim, feature_dim), cross: DMatrix::zeros(feature_dim, output_dim), rows: 0 }
    }

    pub fn from_design(design: &StackedDesign) -> Self {
        Self { gram: design.z.tr_mul(&design.z), cross: design.z.tr_mul(&design.y), rows: design.rows() }
    }

    pub fn feature_dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.cross.ncols()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    /// Adds rows given row-major as `rows x k` features and `rows x m` targets.
    pub fn add_rows(&mut self, features: &[f64], targets: &[f64]) -> Result<()> {
        let (k, m) = (self.feature_dim(), self.output_dim());
        if !features.len().is_multiple_of(k)
            || !targets.len().is_multiple_of(m)
            || features.len() / k != targets.len() / m
        {
            return Err(Error::invalid("feature and target blocks disagree in shape"));
        }
        let rows = features.len() / k;
        if rows == 0 {
            return Ok(());
        }
        // Row-major rows x k is column-major k x rows.
        let zt = DMatrix::from_column_slice(k, rows, features);
        let z = zt.transpose();
        let y = DMatrix::from_row_slice(rows, m, targets);
        self.gram.gemm(1.0, &zt, &z, 1.0);
        self.cross.gemm(1.0, &zt, &y, 1.0);
        self.rows += rows;
        Ok(())
    }

    /// Adds the rows of a feature/target pair, skipping the first `skip` rows.
    pub fn add_trajectory(&mut self, features: &Path, targets: &Path, skip: usize) -> Result<()> {
        if features.len() != targets.len() {
            return Err(Error::invalid("features and targets have different lengths"));
        }
        if features.dim() != self.feature_dim() || targets.dim() != self.output_dim() {
            return Err(Error::invalid(format!(
                "expected {} features and {} outputs, got {} and {}",
                self.feature_dim(),
                self.output_dim(),
                features.dim(),
                targets.dim()
            )));
        }
        let skip = skip.min(features.len());
        self.add_rows(&features.values()[skip * features.dim()..], &targets.values()[skip * targets.dim()..])
    }

    pub fn merge(&mut self, other: &NormalEquations) -> Result<()> {
        if other.gram.shape() != self.gram.shape() || other.cross.shape() != self.cross.shape() {
            return Err(Error::invalid("cannot merge normal equations of different shapes"));
        }
        self.gram += &other.gram;
        self.cross += &other.cross;
        self.rows += other.rows;
        Ok(())
    }

    /// Relative residual `‖(ZᵀZ + λI)β - ZᵀY‖ / ‖ZᵀY‖`.
    pub fn residual(&self, beta: &DMatrix<f64>, lambda: f64) -> f64 {
        let r = &self.gram * beta + beta * lambda - &self.cross;
        relative_residual(&r, &self.cross)
    }

    pub fn solve(&self, lambda: f64) -> Result<ReadoutModel> {
        let beta = self.solve_unchecked(lambda)?;
        let res = self.residual(&beta, lambda);
        check_residual(res)?;
        ReadoutModel::new(beta, lambda)
    }

    fn solve_unchecked(&self, lambda: f64) -> Result<DMatrix<f64>> {
        check_lambda(lambda)?;
        if self.rows == 0 {
            return Err(Error::invalid("no rows accumulated"));
        }
        if !self.gram.iter().chain(self.cross.iter()).all(|v| v.is_finite()) {
            return Err(Error::numeric("design contains non-finite values"));
        }
        let k = self.feature_dim();
        let a = &self.gram + DMatrix::identity(k, k) * lambda;
        if let Some(beta) = cholesky_solve(&a, &self.cross, lambda == 0.0) {
            return Ok(beta);
        }
        let eig = SymmetricEigen::new(a);
        let max = eig.eigenvalues.amax();
        let tol = max * k as f64 * f64::EPSILON;
        if lambda == 0.0 && eig.eigenvalues.iter().any(|&e| e <= tol) {
            return Err(singular_error());
        }
        let inv = eig.eigenvalues.map(|e| if e > tol { 1.0 / e } else { 0.0 });
        let v = &eig.eigenvectors;
        let proj = v.tr_mul(&self.cross);
        Ok(v * DMatrix::from_diagonal(&inv) * proj)
    }
}

fn check_residual(res: f64) -> Result<()> {
    if res.is_nan() || res > RESIDUAL_TOLERANCE {
        return Err(Error::numeric(format!("ridge solution misses the normal equations (relative residual {res:e})")));
    }
    Ok(())
}

/// Normal-equation residual evaluated as `Zᵀ(Zβ - Y) + λβ`, which avoids the
/// cancellation of forming `ZᵀZβ - ZᵀY`.
fn design_residual(z: &DMatrix<f64>, y: &DMatrix<f64>, beta: &DMatrix<f64>, lambda: f64) -> f64 {
    let r = z * beta - y;
    let g = z.tr_mul(&r) + beta * lambda;
    relative_residual(&g, &z.tr_mul(y))
}

fn solve_dual(z: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Option<DMatrix<f64>> {
    let n = z.nrows();
    let kernel = z * z.transpose() + DMatrix::identity(n, n) * lambda;
    cholesky_solve(&kernel, y, lambda == 0.0).map(|alpha| z.tr_mul(&alpha))
}

/// Spectral solve on the singular values of `Z`. At `λ = 0` it requires full
/// column rank (tall designs) or full row rank (wide designs).
fn solve_svd(z: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let svd = SVD::new(z.clone(), true, true);
    let (u, vt) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let s = &svd.singular_values;
    let (rows, k) = z.shape();
    let tol = s.max() * (rows.max(k) as f64) * f64::EPSILON;
    if lambda == 0.0 && s.iter().filter(|&&v| v > tol).count() < rows.min(k) {
        return Err(singular_error());
    }
    let gain = s.map(|v| if v > tol { v / (v * v + lambda) } else { 0.0 });
    Ok(vt.tr_mul(&(DMatrix::from_diagonal(&gain) * u.tr_mul(y))))
}

/// Fits `β̂` on a stacked design.
///
/// Tall designs go through the normal equations, wide ones through the dual
/// system `(ZZᵀ + λI)α = Y`, `β = Zᵀα`. If the fast route misses the residual
/// bound, the fit is redone on the singular values of `Z`.
pub fn ridge_fit(design: &StackedDesign, lambda: f64) -> Result<ReadoutModel> {
    check_lambda(lambda)?;
    if design.rows() == 0 || design.feature_dim() == 0 || design.output_dim() == 0 {
        return Err(Error::invalid("empty design"));
    }
    if design.y.nrows() != design.rows() {
        return Err(Error::invalid("feature and target row counts differ"));
    }
    if !design.z.iter().chain(design.y.iter()).all(|v| v.is_finite()) {
        return Err(Error::numeric("design contains non-finite values"));
    }
    let (z, y) = (&design.z, &design.y);
    let fast = if design.rows() >= design.feature_dim() {
        Some(NormalEquations::from_design(design).solve_unchecked(lambda)?)
    } else {
        solve_dual(z, y, lambda)
    };
    if let Some(beta) = fast {
        if design_residual(z, y, &beta, lambda) <= RESIDUAL_TOLERANCE {
            return ReadoutModel::new(beta, lambda);
        }
    }
    let beta = solve_svd(z, y, lambda)?;
    check_residual(design_residual(z, y, &beta, lambda))?;
    ReadoutModel::new(beta, lambda)
}

/// `‖pred - truth‖₂ / ‖truth‖₂` over all grid values.
pub fn relative_l2(pred: &Path, truth: &Path) -> Result<f64> {
    if pred.len() != truth.len() || pred.dim() != truth.dim() {
        return Err(Error::invalid(format!(
            "prediction is {}x{}, truth is {}x{}",
            pred.len(),
            pred.dim(),
            truth.len(),
            truth.dim()
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, t) in pred.values().iter().zip(truth.values()) {
        num += (p - t) * (p - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("relative error of an all-zero reference".into()));
    }
    Ok((num / den).sqrt())
}

/// Relative error with all trajectories pooled into one vector.
pub fn pooled_relative_l2(pairs: &[(Path, Path)]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (pred, truth) in pairs {
        let r = relative_l2(pred, truth);
        if let Err(Error::InvalidArgument(msg)) = r {
            return Err(Error::InvalidArgument(msg));
        }
        for (p, t) in pred.values().iter().zip(truth.values()) {
            num += (p - t) * (p - t);
            den += t * t;
        }
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("relative error of an all-zero reference".into()));
    }
    Ok((num / den).sqrt())
}

/// Mean and population standard deviation; `(NaN, NaN)` for no data.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{regular_grid, TimeGrid};

    fn grid(n: usize) -> Arc<TimeGrid> {
        Arc::new(regular_grid(1.0, n).unwrap())
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(r, c, |_, _| lcg(&mut s))
    }

    #[test]
    fn stacking_layout() {
        let g = grid(2);
        let f1 = Path::new(g.clone(), 2, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let y1 = Path::new(g.clone(), 1, vec![10., 11., 12.]).unwrap();
        let f2 = Path::new(g.clone(), 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let y2 = Path::new(g.clone(), 1, vec![13., 14., 15.]).unwrap();
        let d = stack(&[(f1.clone(), y1.clone()), (f2, y2)]).unwrap();
        assert_eq!(d.z.shape(), (6, 2));
        assert_eq!(d.y.shape(), (6, 1));
        assert_eq!(d.z.row(3).iter().copied().collect::<Vec<_>>(), vec![7., 8.]);
        assert_eq!(d.y[(3, 0)], 13.0);

        let single = stack(&[(f1.clone(), y1.clone())]).unwrap();
        for n in 0..3 {
            assert_eq!(single.z.row(n).iter().copied().collect::<Vec<_>>(), f1.row(n));
        }
        let ragged = Path::new(grid(3), 2, vec![0.0; 8]).unwrap();
        assert!(stack(&[(f1, y1.clone()), (ragged, y1)]).is_err());
        assert!(stack(&[]).is_err());
    }

    #[test]
    fn exact_interpolation_recovers_beta() {
        let z = random_matrix(40, 4, 1);
        let beta = random_matrix(4, 2, 2);
        let d = StackedDesign { y: &z * &beta, z, trajectory_len: 40 };
        let m = ridge_fit(&d, 0.0).unwrap();
        assert!((m.beta() - &beta).norm() / beta.norm() < 1e-8);
    }

    #[test]
    fn heavy_regularisation_shrinks() {
        let z = random_matrix(30, 3, 3);
        let y = random_matrix(30, 1, 4);
        let d = StackedDesign { z, y, trajectory_len: 30 };
        let m = ridge_fit(&d, 1e9).unwrap();
        let zty = d.z.tr_mul(&d.y);
        assert!(m.beta().norm() <= 1e-6 * zty.norm());
    }

    #[test]
    fn matches_explicit_inverse() {
        let z = random_matrix(50, 3, 5);
        let y = random_matrix(50, 2, 6);
        let d = StackedDesign { z: z.clone(), y: y.clone(), trajectory_len: 50 };
        let m = ridge_fit(&d, 1e-3).unwrap();
        let inv = (z.tr_mul(&z) + DMatrix::identity(3, 3) * 1e-3).try_inverse().unwrap();
        let oracle = inv * z.tr_mul(&y);
        assert!((m.beta() - oracle).amax() < 1e-10);
    }

    #[test]
    fn singular_unregularised_system_fails() {
        let mut z = random_matrix(20, 3, 7);
        for r in 0..20 {
            z[(r, 2)] = z[(r, 1)];
        }
        let y = random_matrix(20, 1, 8);
        let d = StackedDesign { z, y, trajectory_len: 20 };
        match ridge_fit(&d, 0.0) {
            Err(Error::NumericFailure(msg)) => assert!(msg.contains("lambda > 0")),
            other => panic!("expected numeric failure, got {other:?}"),
        }
        assert!(ridge_fit(&d, 1e-3).is_ok());
        assert!(matches!(ridge_fit(&d, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dual_solve_interpolates_wide_designs() {
        let z = random_matrix(10, 30, 9);
        let y = random_matrix(10, 2, 10);
        let d = StackedDesign { z: z.clone(), y: y.clone(), trajectory_len: 10 };
        let m = ridge_fit(&d, 0.0).unwrap();
        assert!((&z * m.beta() - &y).amax() < 1e-10);
        // Same ridge solution either way for lambda > 0.
        let m = ridge_fit(&d, 0.1).unwrap();
        let inv = (z.tr_mul(&z) + DMatrix::identity(30, 30) * 0.1).try_inverse().unwrap();
        assert!((m.beta() - inv * z.tr_mul(&y)).amax() < 1e-10);
    }

    #[test]
    fn dual_singular_rows_fail() {
        let mut z = random_matrix(6, 20, 11);
        for c in 0..20 {
            z[(5, c)] = z[(4, c)];
        }
        let y = random_matrix(6, 1, 12);
        let d = StackedDesign { z, y, trajectory_len: 6 };
        assert!(matches!(ridge_fit(&d, 0.0), Err(Error::NumericFailure(_))));
    }

    #[test]
    fn streamed_equations_match_design() {
        let z = random_matrix(25, 4, 13);
        let y = random_matrix(25, 2, 14);
        let d = StackedDesign { z: z.clone(), y: y.clone(), trajectory_len: 25 };
        let mut ne = NormalEquations::new(4, 2);
        let zr = row_major(&z);
        let yr = row_major(&y);
        ne.add_rows(&zr[..40], &yr[..20]).unwrap();
        ne.add_rows(&zr[40..], &yr[20..]).unwrap();
        assert_eq!(ne.rows(), 25);
        let a = ne.solve(1e-3).unwrap();
        let b = ridge_fit(&d, 1e-3).unwrap();
        assert!((a.beta() - b.beta()).amax() < 1e-12);
        assert!(ne.add_rows(&zr[..3], &yr[..2]).is_err());
    }

    #[test]
    fn predict_identity_and_zero() {
        let g = grid(3);
        let f = Path::new(g, 2, vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        let id = ReadoutModel::new(DMatrix::identity(2, 2), 0.0).unwrap();
        assert_eq!(id.predict(&f).unwrap(), f);
        let zero = ReadoutModel::new(DMatrix::zeros(2, 1), 0.0).unwrap();
        assert!(zero.predict(&f).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            ReadoutModel::new(DMatrix::zeros(3, 1), 0.0).unwrap().predict(&f),
            Err(Error::InvalidArgument(_))
        ));
        assert!(ReadoutModel::new(DMatrix::zeros(3, 1), -0.1).is_err());
    }

    #[test]
    fn relative_error_cases() {
        let g = grid(3);
        let truth = Path::new(g.clone(), 1, vec![1.0, -2.0, 2.0, 4.0]).unwrap();
        assert_eq!(relative_l2(&truth, &truth).unwrap(), 0.0);
        let double = truth.map(|v| 2.0 * v).unwrap();
        assert_eq!(relative_l2(&double, &truth).unwrap(), 1.0);
        // ‖truth‖ = 5, so bumping one entry by 5 gives exactly 1.
        let mut bumped = truth.values().to_vec();
        bumped[1] += 5.0;
        let bumped = Path::new(g.clone(), 1, bumped).unwrap();
        assert_eq!(relative_l2(&bumped, &truth).unwrap(), 1.0);
        let zero = Path::zeros(g.clone(), 1);
        assert!(matches!(relative_l2(&truth, &zero), Err(Error::UndefinedMetric(_))));
        assert!(matches!(relative_l2(&Path::zeros(g, 2), &truth), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
    }
}
