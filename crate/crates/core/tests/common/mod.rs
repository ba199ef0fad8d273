//! Oracles shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use randsig::paths::{regular_grid, Path};
use randsig::readout::{ridge_fit, stack, StackedDesign};
use randsig::tsig::{signature_features, TruncatedSig};

/// Iterated integrals of a piecewise-linear path by exact integration of the
/// polynomial each word traces on every segment. Returns level `l` as a
/// lexicographic vector for `l = 0..=order`.
pub fn nested_integrals(points: &[Vec<f64>], order: usize) -> Vec<Vec<f64>> {
    let d = points[0].len();
    let mut values: Vec<Vec<f64>> = (0..=order).map(|l| vec![0.0; d.pow(l as u32)]).collect();
    values[0][0] = 1.0;
    for seg in points.windows(2) {
        let inc: Vec<f64> = (0..d).map(|i| seg[1][i] - seg[0][i]).collect();
        // polys[l][w] = coefficients in u of word w on this segment.
        let mut polys: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]]];
        for l in 1..=order {
            let mut level = Vec::with_capacity(d.pow(l as u32));
            for (w, &start) in values[l].iter().enumerate() {
                let (prefix, last) = (w / d, w % d);
                let p = &polys[l - 1][prefix];
                let mut q = vec![start];
                q.extend(p.iter().enumerate().map(|(j, c)| c * inc[last] / (j + 1) as f64));
                level.push(q);
            }
            polys.push(level);
        }
        for l in 1..=order {
            for (w, p) in polys[l].iter().enumerate() {
                values[l][w] = p.iter().sum();
            }
        }
    }
    values
}

/// `n` uniform steps in `[-1, 1)^d` starting from the origin.
pub fn random_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![vec![0.0; d]];
    for _ in 0..n {
        let last = p.last().unwrap().clone();
        p.push(last.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect());
    }
    p
}

pub fn to_path(points: &[Vec<f64>], t_end: f64) -> Path {
    let grid = Arc::new(regular_grid(t_end, points.len() - 1).unwrap());
    Path::new(grid, points[0].len(), points.concat()).unwrap()
}

/// Largest entrywise deviation, relative where the oracle exceeds one.
pub fn max_level_diff(sig: &TruncatedSig, oracle: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (l, want) in oracle.iter().enumerate() {
        for (a, b) in sig.level(l).iter().zip(want) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    worst
}

/// Sample mean and its standard error.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Uniform error of the best linear readout of the order-`order` signature of
/// `X_t = t` onto `e^t` on `[0, t_end]`.
pub fn exponential_fit_error(order: usize, t_end: f64) -> f64 {
    let steps = 400;
    let grid = Arc::new(regular_grid(t_end, steps).unwrap());
    let x = Path::new(Arc::clone(&grid), 1, grid.times().to_vec()).unwrap();
    let y = x.map(f64::exp).unwrap();
    let features = signature_features(&x, order, true).unwrap();
    let model = ridge_fit(&stack(&[(features.clone(), y.clone())]).unwrap(), 0.0).unwrap();
    let pred = model.predict(&features).unwrap();
    pred.values().iter().zip(y.values()).fold(0.0_f64, |m, (p, t)| m.max((p - t).abs()))
}

/// `‖(ZᵀZ + λI)β − ZᵀY‖ / ‖ZᵀY‖`.
pub fn normal_residual(d: &StackedDesign, beta: &DMatrix<f64>, lambda: f64) -> f64 {
    let zt = d.z.transpose();
    let lhs = &zt * &d.z * beta + beta * lambda;
    let rhs = &zt * &d.y;
    (lhs - &rhs).norm() / rhs.norm()
}
