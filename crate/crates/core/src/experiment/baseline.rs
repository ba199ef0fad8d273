//! Randomized signature against an echo state network on identical data.

use crate::error::Result;
use crate::esn::Esn;
use crate::pipeline::{build_reservoir, train_and_evaluate};

use super::{dataset, prediction_table, push_errors, simulator, ExperimentConfig, Report};

pub(super) fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let esn_cfg = cfg.esn.as_ref().expect("validated");
    let sim = simulator(cfg)?;
    let data = dataset(cfg, &sim)?;
    let d = sim.system().control_dim();
    let keep = cfg.output.sample_trajectories > 0;
    for &seed in &cfg.experiment.seeds {
        let reservoir = build_reservoir(cfg.reservoir.k, d, cfg.reservoir.activation()?, seed)?;
        let rs = train_and_evaluate(&reservoir, &data, cfg.readout.lambda, keep)?;
        push_errors(report, "rs", seed, &rs.evaluation.errors);
        report.push("rs_summary", seed, "all", "parameter_count", rs.model.parameter_count() as f64);
        report.push("rs_summary", seed, "all", "pooled_rel_l2", rs.evaluation.pooled);
        report.time(format!("rs fit seed {seed}"), rs.fit_seconds);

        let esn = Esn::new(esn_cfg.params(seed), d)?;
        let es = train_and_evaluate(&esn, &data, cfg.readout.lambda, keep)?;
        push_errors(report, "esn", seed, &es.evaluation.errors);
        report.push("esn_summary", seed, "all", "parameter_count", es.model.parameter_count() as f64);
        report.push("esn_summary", seed, "all", "pooled_rel_l2", es.evaluation.pooled);
        report.time(format!("esn fit seed {seed}"), es.fit_seconds);

        if keep && seed == cfg.experiment.seeds[0] {
            let n = cfg.output.sample_trajectories;
            report.tables.push(prediction_table("rs_trajectories", &data.test, &rs.predictions, n));
            report.tables.push(prediction_table("esn_trajectories", &data.test, &es.predictions, n));
        }
    }
    Ok(())
}
