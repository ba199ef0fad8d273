//! Enzyme kinetics: train on one injection law, test in and out of distribution.

use crate::dynamics::simulate_enzyme;
use crate::error::Result;
use crate::features::FeatureMap;
use crate::paths::{time_augment, Path};
use crate::pipeline::{build_reservoir, evaluate, predict_all, train_and_evaluate, Sample, Simulator, SystemSpec};
use crate::readout::ReadoutModel;
use crate::rng::{SeedStream, Stream};

use super::config::injection;
use super::{dataset, prediction_table, push_errors, simulator, ExperimentConfig, Report};

/// Largest absolute product predicted and simulated under a zero injection.
fn zero_control<F: FeatureMap>(sim: &Simulator, map: &F, model: &ReadoutModel, grid_from: &Path) -> Result<(f64, f64)> {
    let zero = Path::zeros(grid_from.grid().clone(), 1);
    let pred = model.predict(&map.features(&time_augment(&zero))?)?;
    let truth = match sim.system() {
        SystemSpec::Enzyme { params, .. } => simulate_enzyme(params, &zero)?,
        _ => unreachable!("validated enzyme system"),
    };
    Ok((max_abs(&pred), max_abs(&truth)))
}

fn max_abs(p: &Path) -> f64 {
    p.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub(super) fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let ood = cfg.ood.as_ref().expect("validated");
    let sim = simulator(cfg)?;
    let data = dataset(cfg, &sim)?;
    let ood_system = match sim.system() {
        SystemSpec::Enzyme { params, .. } => {
            SystemSpec::Enzyme { params: *params, law: injection(ood.law, ood.level, ood.scale) }
        }
        _ => unreachable!("validated enzyme system"),
    };
    let ood_sim = Simulator::new(ood_system, sim.grid())?;
    let ood_all =
        ood_sim.samples(SeedStream::new(cfg.experiment.data_seed), Stream::TestControls, cfg.experiment.n_test)?;
    // A step law that never fires injects nothing, so the product stays at
    // zero and a relative error is undefined; those are scored absolutely.
    let (ood_test, silent): (Vec<Sample>, Vec<Sample>) =
        ood_all.into_iter().partition(|s| s.target.values().iter().any(|&v| v != 0.0));
    let d = sim.system().control_dim();
    let keep = cfg.output.sample_trajectories > 0;
    for &seed in &cfg.experiment.seeds {
        let reservoir = build_reservoir(cfg.reservoir.k, d, cfg.reservoir.activation()?, seed)?;
        let trained = train_and_evaluate(&reservoir, &data, cfg.readout.lambda, keep)?;
        report.time(format!("fit seed {seed}"), trained.fit_seconds);
        push_errors(report, "in_distribution", seed, &trained.evaluation.errors);
        let (ood_eval, ood_preds) = evaluate(&reservoir, &trained.model, &ood_test, keep)?;
        push_errors(report, "out_of_distribution", seed, &ood_eval.errors);
        report.push("summary", seed, "in_distribution", "pooled_rel_l2", trained.evaluation.pooled);
        report.push("summary", seed, "out_of_distribution", "pooled_rel_l2", ood_eval.pooled);
        report.push("summary", seed, "out_of_distribution", "silent_trajectories", silent.len() as f64);
        if !silent.is_empty() {
            let controls: Vec<&Path> = silent.iter().map(|s| &s.control).collect();
            let preds = predict_all(&reservoir, &trained.model, &controls)?;
            let worst = preds.iter().map(max_abs).fold(0.0, f64::max);
            report.push("summary", seed, "out_of_distribution", "silent_max_abs_product", worst);
        }
        let (pred0, truth0) = zero_control(&sim, &reservoir, &trained.model, &data.test[0].control)?;
        report.push("zero_control", seed, "prediction", "max_abs_product", pred0);
        report.push("zero_control", seed, "simulation", "max_abs_product", truth0);
        if keep && seed == cfg.experiment.seeds[0] {
            let n = cfg.output.sample_trajectories;
            report.tables.push(prediction_table("in_distribution_trajectories", &data.test, &trained.predictions, n));
            report.tables.push(prediction_table("out_of_distribution_trajectories", &ood_test, &ood_preds, n));
        }
    }
    Ok(())
}
