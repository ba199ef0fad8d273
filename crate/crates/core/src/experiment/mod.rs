//! Experiment presets reproducing the studies of the randomized-signature
//! method, plus a `custom` preset driven entirely by configuration.

pub mod config;
pub mod report;

mod baseline;
mod comparison;
mod compression;
mod enzyme;
mod irregular;
mod robustness;

use std::time::Instant;

pub use config::{ExperimentConfig, Preset};
pub use report::{Aggregate, MetricRow, Report, Table};

use crate::error::Result;
use crate::paths::Path;
use crate::pipeline::{build_reservoir, train_and_evaluate, Dataset, Sample, Simulator};

pub use compression::{
    compression_errors_direct, compression_errors_gram, hat_residual, signature_gram, CompressionSweep, ROUNDOFF_FLOOR,
};

/// Runs the preset named in `cfg.experiment.preset`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let mut report = Report::new(cfg.experiment.preset, cfg.to_toml_string()?);
    let start = Instant::now();
    match cfg.experiment.preset {
        Preset::Robustness => robustness::run(cfg, &mut report)?,
        Preset::Compression => compression::run(cfg, &mut report)?,
        Preset::RsigVsTsig => comparison::run(cfg, &mut report)?,
        Preset::BaselineCompare => baseline::run(cfg, &mut report)?,
        Preset::EnzymeOod => enzyme::run(cfg, &mut report)?,
        Preset::IrregularGrid => irregular::run(cfg, &mut report)?,
        Preset::Custom => run_custom(cfg, &mut report)?,
    }
    report.time("total", start.elapsed().as_secs_f64());
    Ok(report)
}

pub(crate) fn simulator(cfg: &ExperimentConfig) -> Result<Simulator> {
    Simulator::new(cfg.system.to_spec()?, cfg.grid.to_spec())
}

pub(crate) fn dataset(cfg: &ExperimentConfig, sim: &Simulator) -> Result<Dataset> {
    Dataset::generate(
        sim,
        cfg.experiment.n_train,
        cfg.experiment.n_test,
        cfg.readout.observation_noise,
        cfg.experiment.data_seed,
    )
}

/// Per-trajectory relative errors of one fitted model.
pub(crate) fn push_errors(report: &mut Report, group: &str, seed: u64, errors: &[f64]) {
    for (i, e) in errors.iter().enumerate() {
        report.push(group, seed, i.to_string(), "rel_l2", *e);
    }
}

/// Long-format table `trajectory, t, truth_*, prediction_*` for the first
/// `count` samples.
pub(crate) fn prediction_table(name: &str, samples: &[Sample], preds: &[Path], count: usize) -> Table {
    let m = samples.first().map_or(1, |s| s.target.dim());
    let mut header = vec!["trajectory".to_string(), "t".to_string()];
    header.extend((1..=m).map(|j| format!("truth_{j}")));
    header.extend((1..=m).map(|j| format!("prediction_{j}")));
    let mut rows = Vec::new();
    for (i, (s, p)) in samples.iter().zip(preds).take(count).enumerate() {
        for n in 0..s.target.len() {
            let mut row = vec![i as f64, s.target.times()[n]];
            row.extend_from_slice(s.target.row(n));
            row.extend_from_slice(p.row(n));
            rows.push(row);
        }
    }
    Table { name: name.to_string(), header, rows }
}

fn run_custom(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let sim = simulator(cfg)?;
    let data = dataset(cfg, &sim)?;
    let d = sim.system().control_dim();
    let keep = cfg.output.sample_trajectories > 0;
    for &seed in &cfg.experiment.seeds {
        let reservoir = build_reservoir(cfg.reservoir.k, d, cfg.reservoir.activation()?, seed)?;
        let trained = train_and_evaluate(&reservoir, &data, cfg.readout.lambda, keep)?;
        push_errors(report, "rs", seed, &trained.evaluation.errors);
        report.push("rs_pooled", seed, "all", "rel_l2", trained.evaluation.pooled);
        report.time(format!("fit seed {seed}"), trained.fit_seconds);
        if keep && seed == cfg.experiment.seeds[0] {
            report.tables.push(prediction_table(
                "sample_trajectories",
                &data.test,
                &trained.predictions,
                cfg.output.sample_trajectories,
            ));
        }
    }
    Ok(())
}
