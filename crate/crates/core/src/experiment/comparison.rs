//! Randomized (`k = d`) against truncated signature features on the
//! multidimensional fOU system, as the state dimension grows.

use std::time::Instant;

use crate::error::Result;
use crate::features::{FeatureMap, SignatureFeatures};
use crate::pipeline::{build_reservoir, check_budget, train_and_evaluate, Dataset, Simulator};

use super::config::SystemSection;
use super::{push_errors, ExperimentConfig, Report};

const BUDGET: u64 = 4 << 30;

fn group(kind: &str, m: usize, n_train: usize) -> String {
    format!("{kind}_m{m}_n{n_train}")
}

/// Trains `map` unless the stacked design would not fit in `BUDGET`.
fn fit_one<F: FeatureMap>(
    report: &mut Report,
    name: &str,
    seed: u64,
    map: &F,
    data: &Dataset,
    lambda: f64,
) -> Result<()> {
    let rows = (data.train.len() * data.train[0].control.len()) as u64;
    let k = map.feature_dim() as u64;
    report.push(name, seed, "all", "parameter_count", (k * data.train_targets[0].dim() as u64) as f64);
    report.push(name, seed, "all", "underdetermined", f64::from(u8::from(rows < k)));
    let need = 8 * if rows < k { 2 * rows * k + rows * rows } else { k * k + 2 * k };
    if let Err(e) = check_budget(name, need, BUDGET) {
        report.push(name, seed, "all", "skipped", 1.0);
        report.time(format!("{name} skipped: {e}"), 0.0);
        return Ok(());
    }
    let start = Instant::now();
    let trained = train_and_evaluate(map, data, lambda, false)?;
    report.time(format!("{name} seed {seed}"), start.elapsed().as_secs_f64());
    push_errors(report, name, seed, &trained.evaluation.errors);
    report.push(name, seed, "all", "mean_rel_l2", trained.evaluation.mean);
    Ok(())
}

pub(super) fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let sec = cfg.comparison.as_ref().expect("validated");
    let hurst = match cfg.system {
        SystemSection::Fou { hurst, .. } => hurst,
        _ => 0.3,
    };
    for &m in &sec.m_values {
        let system = SystemSection::Fou {
            hurst,
            ratio_dim: Some(m),
            mu: vec![1.0],
            theta: vec![vec![1.0]],
            sigma: vec![vec![1.0]],
            y0: vec![1.0],
        };
        let sim = Simulator::new(system.to_spec()?, cfg.grid.to_spec())?;
        let d = sim.system().control_dim();
        let signature = SignatureFeatures::new(d, sec.order, true)?;
        for &n_train in &sec.n_train_values {
            let data = Dataset::generate(
                &sim,
                n_train,
                cfg.experiment.n_test,
                cfg.readout.observation_noise,
                cfg.experiment.data_seed,
            )?;
            for &seed in &cfg.experiment.seeds {
                let reservoir = build_reservoir(d, d, cfg.reservoir.activation()?, seed)?;
                fit_one(report, &group("rsig", m, n_train), seed, &reservoir, &data, cfg.readout.lambda)?;
            }
            let seed = cfg.experiment.seeds[0];
            fit_one(report, &group("tsig", m, n_train), seed, &signature, &data, cfg.readout.lambda)?;
        }
    }
    Ok(())
}
