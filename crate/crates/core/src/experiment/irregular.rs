//! Langevin system on regular against per-trajectory random grids.

use crate::error::Result;
use crate::pipeline::{build_reservoir, train_and_evaluate, Dataset, GridSpec, Simulator};

use super::{push_errors, ExperimentConfig, Report, Table};

pub(super) fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let sec = cfg.irregular.as_ref().expect("validated");
    let system = cfg.system.to_spec()?;
    let d = system.control_dim();
    let mut rows = Vec::new();
    for &[points, k] in &sec.cells {
        let mut cell = vec![points as f64, k as f64];
        for (mode, grid) in [
            ("regular", GridSpec::Regular { t_end: 1.0, steps: points - 1 }),
            ("irregular", GridSpec::Irregular { points }),
        ] {
            let sim = Simulator::new(system.clone(), grid)?;
            let data = Dataset::generate(
                &sim,
                cfg.experiment.n_train,
                cfg.experiment.n_test,
                cfg.readout.observation_noise,
                cfg.experiment.data_seed,
            )?;
            let name = format!("{mode}_N{points}_k{k}");
            let mut means = Vec::new();
            for &seed in &cfg.experiment.seeds {
                let reservoir = build_reservoir(k, d, cfg.reservoir.activation()?, seed)?;
                let trained = train_and_evaluate(&reservoir, &data, cfg.readout.lambda, false)?;
                push_errors(report, &name, seed, &trained.evaluation.errors);
                report.time(format!("{name} seed {seed}"), trained.fit_seconds);
                means.push(trained.evaluation.mean);
            }
            cell.push(means.iter().sum::<f64>() / means.len() as f64);
        }
        rows.push(cell);
    }
    report.tables.push(Table {
        name: "grid_table".into(),
        header: ["points", "k", "regular", "irregular"].iter().map(|s| s.to_string()).collect(),
        rows,
    });
    Ok(())
}
