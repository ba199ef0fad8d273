//! Spread of test predictions across reservoir draws on fixed data.

use crate::error::Result;
use crate::paths::Path;
use crate::pipeline::{build_reservoir, train_and_evaluate};

use super::{dataset, push_errors, simulator, ExperimentConfig, Report, Table};

/// Pointwise mean and population std across `preds` (all on one grid).
pub(crate) fn pointwise_band(preds: &[&Path]) -> (Vec<f64>, Vec<f64>) {
    let n = preds[0].values().len();
    let count = preds.len() as f64;
    let mut mean = vec![0.0; n];
    for p in preds {
        for (m, v) in mean.iter_mut().zip(p.values()) {
            *m += v / count;
        }
    }
    let mut var = vec![0.0; n];
    for p in preds {
        for ((s, v), m) in var.iter_mut().zip(p.values()).zip(&mean) {
            *s += (v - m) * (v - m) / count;
        }
    }
    (mean, var.into_iter().map(f64::sqrt).collect())
}

pub(super) fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let sim = simulator(cfg)?;
    let data = dataset(cfg, &sim)?;
    let d = sim.system().control_dim();
    let mut per_seed = Vec::with_capacity(cfg.experiment.seeds.len());
    for &seed in &cfg.experiment.seeds {
        let reservoir = build_reservoir(cfg.reservoir.k, d, cfg.reservoir.activation()?, seed)?;
        let trained = train_and_evaluate(&reservoir, &data, cfg.readout.lambda, true)?;
        push_errors(report, "rs", seed, &trained.evaluation.errors);
        report.time(format!("fit seed {seed}"), trained.fit_seconds);
        per_seed.push(trained.predictions);
    }

    for (j, sample) in data.test.iter().enumerate() {
        let preds: Vec<&Path> = per_seed.iter().map(|p| &p[j]).collect();
        let (mean, std) = pointwise_band(&preds);
        let truth = sample.target.values();
        let rms = (truth.iter().map(|v| v * v).sum::<f64>() / truth.len() as f64).sqrt();
        let mean_std = std.iter().sum::<f64>() / std.len() as f64;
        let item = j.to_string();
        report.push("band", 0, item.clone(), "mean_std", mean_std);
        report.push("band", 0, item.clone(), "max_std", std.iter().copied().fold(0.0, f64::max));
        report.push("band", 0, item, "std_ratio", mean_std / rms);

        if j < cfg.output.sample_trajectories.max(1) {
            let dim = sample.target.dim();
            let mut rows = Vec::with_capacity(sample.target.len() * dim);
            for n in 0..sample.target.len() {
                for c in 0..dim {
                    let i = n * dim + c;
                    let (m, s) = (mean[i], std[i]);
                    rows.push(vec![sample.target.times()[n], c as f64, truth[i], m, s, m - 3.0 * s, m + 3.0 * s]);
                }
            }
            let header = ["t", "component", "truth", "mean", "std", "lower", "upper"];
            report.tables.push(Table {
                name: format!("band_{j}"),
                header: header.iter().map(|s| s.to_string()).collect(),
                rows,
            });
        }
    }
    Ok(())
}
