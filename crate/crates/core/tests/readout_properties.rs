//! Ridge readout invariants over random designs, plus persistence round trips.

mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use randsig::container::{decode_model, decode_reservoir, encode_model, encode_reservoir, ModelFile};
use randsig::paths::{regular_grid, Path};
use randsig::readout::{relative_l2, ridge_fit, StackedDesign, RESIDUAL_TOLERANCE};
use randsig::rsig::{default_activation, Activation, Reservoir};

use common::normal_residual;

fn design(rows: usize, k: usize, m: usize, values: &[f64]) -> StackedDesign {
    let z = DMatrix::from_fn(rows, k, |i, j| values[(i * k + j) % values.len()] + if i == j { 1.0 } else { 0.0 });
    let y = DMatrix::from_fn(rows, m, |i, j| values[(7 * i + 3 * j + 1) % values.len()]);
    StackedDesign { z, y, trajectory_len: rows }
}

fn data_fit(d: &StackedDesign, beta: &DMatrix<f64>) -> f64 {
    (&d.z * beta - &d.y).norm_squared()
}

fn arb_design() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>)> {
    (4usize..40, 1usize..8, 1usize..4, prop::collection::vec(-1.0f64..1.0, 16..64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn normal_equation_residual_is_tiny((rows, k, m, v) in arb_design(), exp in -6i32..2) {
        let lambda = 10f64.powi(exp);
        let d = design(rows, k, m, &v);
        prop_assume!(d.y.norm() > 1e-6 && (d.z.transpose() * &d.y).norm() > 1e-9);
        let model = ridge_fit(&d, lambda).unwrap();
        prop_assert!(normal_residual(&d, model.beta(), lambda) <= RESIDUAL_TOLERANCE);
    }

    #[test]
    fn row_permutation_does_not_change_fit((rows, k, m, v) in arb_design(), shift in 1usize..40) {
        let d = design(rows, k, m, &v);
        prop_assume!((d.z.transpose() * &d.y).norm() > 1e-9);
        let perm: Vec<usize> = (0..rows).map(|i| (i * (2 * shift + 1) + shift) % rows).collect();
        let mut seen = perm.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assume!(seen.len() == rows);
        let p = StackedDesign {
            z: DMatrix::from_fn(rows, k, |i, j| d.z[(perm[i], j)]),
            y: DMatrix::from_fn(rows, m, |i, j| d.y[(perm[i], j)]),
            trajectory_len: rows,
        };
        let a = ridge_fit(&d, 1e-3).unwrap();
        let b = ridge_fit(&p, 1e-3).unwrap();
        let rel = (a.beta() - b.beta()).norm() / a.beta().norm().max(1e-300);
        prop_assert!(rel <= 1e-8, "{}", rel);
    }

    #[test]
    fn data_fit_shrinks_as_penalty_vanishes((rows, k, m, v) in arb_design()) {
        let d = design(rows, k, m, &v);
        prop_assume!((d.z.transpose() * &d.y).norm() > 1e-9);
        let fits: Vec<f64> = [1e2, 1.0, 1e-2, 1e-4]
            .iter()
            .map(|&l| data_fit(&d, ridge_fit(&d, l).unwrap().beta()))
            .collect();
        for w in fits.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-14, "{:?}", fits);
        }
    }

    #[test]
    fn reservoir_container_round_trips(k in 1usize..12, d in 1usize..4, seed in any::<u64>(), tanh in any::<bool>()) {
        let act = if tanh { Activation::Tanh } else { default_activation(k, d) };
        let r = Reservoir::generate(k, d, act, seed).unwrap();
        let bytes = encode_reservoir(&r);
        prop_assert_eq!(decode_reservoir(&bytes).unwrap(), r);
        for cut in [0, bytes.len() / 2, bytes.len() - 1] {
            prop_assert!(decode_reservoir(&bytes[..cut]).is_err());
        }
    }
}

#[test]
fn huge_penalty_shrinks_to_zero() {
    let v: Vec<f64> = (0..37).map(|i| ((i * 13) % 17) as f64 / 17.0 - 0.5).collect();
    let d = design(30, 5, 2, &v);
    let model = ridge_fit(&d, 1e9).unwrap();
    let scale = (d.z.transpose() * &d.y).norm();
    assert!(model.beta().norm() <= 1e-6 * scale);
}

#[test]
fn single_entry_perturbation_has_unit_relative_error() {
    let grid = Arc::new(regular_grid(1.0, 3).unwrap());
    let truth = Path::new(Arc::clone(&grid), 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 0.0, 2.0, -2.0]).unwrap();
    let norm = truth.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut bumped = truth.values().to_vec();
    bumped[0] += norm;
    let pred = Path::new(grid, 2, bumped).unwrap();
    assert_eq!(relative_l2(&pred, &truth).unwrap(), 1.0);
}

#[test]
fn model_container_round_trips() {
    let r = Reservoir::generate(6, 2, default_activation(6, 2), 4).unwrap();
    let v: Vec<f64> = (0..29).map(|i| (i as f64 * 0.37).sin()).collect();
    let readout = ridge_fit(&design(40, 6, 1, &v), 1e-3).unwrap();
    let file = ModelFile { readout, reservoir: r };
    let back = decode_model(&encode_model(&file)).unwrap();
    assert_eq!(back, file);
}
