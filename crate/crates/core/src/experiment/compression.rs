//! Regression of flattened truncated signatures onto randomized signatures of
//! the same path, as a function of the reservoir size `k`.
//!
//! The in-memory route fits `β` explicitly. The Gram route never forms the
//! signature matrix `S`: it accumulates `G = SSᵀ` one first letter at a time
//! and evaluates `‖(I - H)S‖_F² = tr((I - H)² G)` with the ridge hat matrix
//! `H` of the reservoir states.

use std::sync::Arc;

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::paths::{regular_grid, sample_brownian, time_augment, Path};
use crate::pipeline::{build_reservoir, check_budget};
use crate::readout::{ridge_fit, stack};
use crate::rng::{SeedStream, Stream};
use crate::tsig::{flat_dim, signature_features, SignatureAccumulator};

use super::config::CompressionSection;
use super::{ExperimentConfig, Report, Table};

/// Error increases below this are round-off, not violations of monotonicity.
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

/// Errors of one sweep over `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionSweep {
    pub ks: Vec<usize>,
    pub errors: Vec<f64>,
    pub flat_dim: usize,
}

impl CompressionSweep {
    /// Smallest swept `k` whose error is at most `target`.
    pub fn k_reaching(&self, target: f64) -> Option<usize> {
        self.ks.iter().zip(&self.errors).find(|(_, &e)| e <= target).map(|(&k, _)| k)
    }

    /// Number of consecutive pairs where the error grows by more than
    /// [`ROUNDOFF_FLOOR`]; once interpolation is exact the curve only jitters
    /// at machine precision.
    pub fn violations(&self) -> usize {
        self.errors.windows(2).filter(|w| w[1] > w[0] + ROUNDOFF_FLOOR).count()
    }
}

fn control_path(sec: &CompressionSection, seed: u64) -> Result<Path> {
    if sec.dim < 2 {
        return Err(Error::invalid("compression needs d >= 2 (time plus noise)"));
    }
    let grid = Arc::new(regular_grid(1.0, sec.steps)?);
    let w = sample_brownian(&grid, sec.dim - 1, &mut SeedStream::new(seed).rng(Stream::TrainControls, 0))?;
    Ok(time_augment(&w))
}

fn frobenius_ratio(pred: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    let den: f64 = truth.iter().map(|t| t * t).sum();
    (num / den).sqrt()
}

/// Explicit fit of `β` for every `k`.
pub fn compression_errors_direct(
    x: &Path,
    order: usize,
    ks: &[usize],
    lambda: f64,
    seed: u64,
    budget: u64,
) -> Result<CompressionSweep> {
    let flat = flat_dim(x.dim(), order).ok_or_else(|| Error::invalid("signature dimension overflows"))?;
    let rows = x.len() as u64;
    let kmax = ks.iter().copied().max().unwrap_or(0) as u64;
    let need = 8 * (3 * rows * flat as u64 + kmax * flat as u64 + rows * kmax);
    check_budget("in-memory compression fit", need, budget)?;
    let s = signature_features(x, order, false)?;
    let mut errors = Vec::with_capacity(ks.len());
    for &k in ks {
        let reservoir = build_reservoir(k, x.dim(), None, seed)?;
        let z = reservoir.evolve(x)?;
        let model = ridge_fit(&stack(&[(z.clone(), s.clone())])?, lambda)?;
        let pred = model.predict(&z)?;
        errors.push(frobenius_ratio(pred.values(), s.values()));
    }
    Ok(CompressionSweep { ks: ks.to_vec(), errors, flat_dim: flat })
}

/// `SSᵀ` accumulated one first letter at a time.
pub fn signature_gram(x: &Path, order: usize, budget: u64) -> Result<DMatrix<f64>> {
    let d = x.dim();
    let flat = flat_dim(d, order).ok_or_else(|| Error::invalid("signature dimension overflows"))?;
    let rows = x.len();
    // One letter block of S, the accumulator and its scratch, and one segment.
    let block = flat / d;
    let need = 8 * (rows as u64 * block as u64 + 2 * block as u64 + flat as u64 + (rows * rows) as u64);
    check_budget("signature Gram accumulation", need, budget)?;
    let mut gram = DMatrix::zeros(rows, rows);
    let mut inc = vec![0.0; d];
    let mut values = Vec::with_capacity(rows * block);
    for letter in 0..d {
        let mut acc = SignatureAccumulator::restricted(d, order, letter)?;
        values.clear();
        for n in 0..rows {
            if n > 0 {
                x.increment_into(n - 1, &mut inc);
                acc.push_increment(&inc);
            }
            acc.flatten_into(&mut values);
        }
        let w = acc.flat_len();
        // Row-major rows x w is column-major w x rows.
        let rt = DMatrix::from_column_slice(w, rows, &values);
        gram.gemm(1.0, &rt.transpose(), &rt, 1.0);
    }
    Ok(gram)
}

/// Relative error `‖(I - H)S‖_F / ‖S‖_F` from `G = SSᵀ` and states `Z`.
pub fn hat_residual(gram: &DMatrix<f64>, z: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = z.nrows();
    let svd = SVD::new(z.clone(), true, false);
    let u = svd.u.as_ref().expect("u requested");
    let s = &svd.singular_values;
    let tol = s.max() * (n.max(z.ncols()) as f64) * f64::EPSILON;
    let shrink = s.map(|v| if v > tol { v * v / (v * v + lambda) } else { 0.0 });
    let hat = u * DMatrix::from_diagonal(&shrink) * u.transpose();
    let e = DMatrix::identity(n, n) - hat;
    let num = (&e * &e * gram).trace().max(0.0);
    (num / gram.trace()).sqrt()
}

/// Gram-route sweep; memory scales with `rows · flat / d` instead of `rows · flat`.
pub fn compression_errors_gram(
    x: &Path,
    order: usize,
    ks: &[usize],
    lambda: f64,
    seed: u64,
    budget: u64,
) -> Result<CompressionSweep> {
    let flat = flat_dim(x.dim(), order).ok_or_else(|| Error::invalid("signature dimension overflows"))?;
    let gram = signature_gram(x, order, budget)?;
    let mut errors = Vec::with_capacity(ks.len());
    for &k in ks {
        let reservoir = build_reservoir(k, x.dim(), None, seed)?;
        let z = reservoir.evolve(x)?;
        let zm = DMatrix::from_row_slice(z.len(), k, z.values());
        errors.push(hat_residual(&gram, &zm, lambda));
    }
    Ok(CompressionSweep { ks: ks.to_vec(), errors, flat_dim: flat })
}

pub(super) fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let sec = cfg.compression.as_ref().expect("validated");
    let x = control_path(sec, cfg.experiment.data_seed)?;
    let seed = cfg.experiment.seeds[0];
    let start = std::time::Instant::now();
    let sweep = if cfg.experiment.full_scale {
        compression_errors_gram(&x, sec.order, &sec.k_values, sec.lambda, seed, sec.memory_budget_bytes)?
    } else {
        compression_errors_direct(&x, sec.order, &sec.k_values, sec.lambda, seed, sec.memory_budget_bytes)?
    };
    report.time("sweep", start.elapsed().as_secs_f64());
    let route = if cfg.experiment.full_scale { "gram" } else { "direct" };
    for (k, e) in sweep.ks.iter().zip(&sweep.errors) {
        report.push("compression", seed, k.to_string(), "rel_frobenius", *e);
    }
    let summary = "compression_summary";
    report.push(summary, seed, route, "signature_integrals", sweep.flat_dim as f64);
    report.push(summary, seed, route, "monotone_violations", sweep.violations() as f64);
    report.push(summary, seed, route, "steps", (sweep.errors.len().saturating_sub(1)) as f64);
    let reached = sweep.k_reaching(sec.target_error);
    report.push(summary, seed, route, "k_at_target", reached.map_or(f64::NAN, |k| k as f64));
    report.push(summary, seed, route, "rsig_ops_at_target", reached.map_or(f64::NAN, |k| (k * k * x.dim()) as f64));
    report.tables.push(Table {
        name: "compression_curve".into(),
        header: vec!["k".into(), "rel_frobenius".into(), "rsig_ops".into()],
        rows: sweep.ks.iter().zip(&sweep.errors).map(|(&k, &e)| vec![k as f64, e, (k * k * x.dim()) as f64]).collect(),
    });
    Ok(())
}
