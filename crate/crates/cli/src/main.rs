use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use randsig::container::{decode_model, decode_reservoir, encode_model, encode_reservoir, ModelFile};
use randsig::experiment::{self, ExperimentConfig, Preset};
use randsig::features::{FeatureMap, SignatureFeatures};
use randsig::paths::{read_path_csv, write_path_csv, PathCsvKind};
use randsig::pipeline::{build_reservoir, train_pipeline, Simulator};
use randsig::rng::{SeedStream, Stream};
use randsig::{Error, Result};

#[derive(Parser)]
#[command(name = "randsig", version, about = "Randomized signature reservoirs for controlled dynamics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file overriding preset defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data and reservoir seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the full-scale preset defaults.
    #[arg(long, global = true)]
    full_scale: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureKind {
    Rsig,
    Tsig,
}

#[derive(Subcommand)]
enum Command {
    /// Write controls and simulated trajectories of the configured system.
    Simulate {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Write randomized or truncated signature features of a control CSV.
    Features {
        /// Control path CSV (`t,x1,...,xd`).
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FeatureKind::Rsig)]
        kind: FeatureKind,
        /// Reservoir size for a freshly drawn reservoir.
        #[arg(long, default_value_t = 50)]
        k: usize,
        /// Truncation order for `tsig`.
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Reuse a saved reservoir instead of drawing one.
        #[arg(long)]
        reservoir: Option<PathBuf>,
    },
    /// Fit a readout on simulated data and write the model and test metrics.
    Train,
    /// Apply a saved model to a control CSV.
    Predict {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run an experiment preset and write its report.
    Experiment {
        /// One of robustness, compression, rsig_vs_tsig, baseline_compare,
        /// enzyme_ood, irregular_grid, custom.
        preset: Preset,
    },
}

impl Common {
    fn config(&self, preset: Option<Preset>) -> Result<ExperimentConfig> {
        let cfg = match &self.config {
            Some(p) => ExperimentConfig::from_toml_str(&fs::read_to_string(p)?, preset, self.full_scale)?,
            None => ExperimentConfig::preset(preset.unwrap_or(Preset::Custom), self.full_scale),
        };
        Ok(match self.seed {
            Some(s) => cfg.with_seed(s),
            None => cfg,
        })
    }

    fn out_dir(&self, default: &str) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(default));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn write_csv(path: &randsig::paths::Path, kind: PathCsvKind, file: &FsPath) -> Result<()> {
    write_path_csv(path, kind, BufWriter::new(File::create(file)?))
}

fn read_csv(file: &FsPath) -> Result<randsig::paths::Path> {
    read_path_csv(File::open(file)?)
}

fn simulate(common: &Common, count: usize) -> Result<()> {
    let cfg = common.config(None)?;
    let sim = Simulator::new(cfg.system.to_spec()?, cfg.grid.to_spec())?;
    let dir = common.out_dir("out/simulate")?;
    let samples = sim.samples(SeedStream::new(cfg.experiment.data_seed), Stream::TrainControls, count)?;
    for (i, s) in samples.iter().enumerate() {
        write_csv(&s.control, PathCsvKind::Control, &dir.join(format!("control_{i}.csv")))?;
        write_csv(&s.target, PathCsvKind::Trajectory, &dir.join(format!("trajectory_{i}.csv")))?;
    }
    println!("wrote {count} trajectories to {}", dir.display());
    Ok(())
}

fn features(
    common: &Common,
    input: &FsPath,
    kind: FeatureKind,
    k: usize,
    order: usize,
    saved: Option<&FsPath>,
) -> Result<()> {
    let x = read_csv(input)?;
    let dir = common.out_dir("out/features")?;
    let f = match kind {
        FeatureKind::Rsig => {
            let reservoir = match saved {
                Some(p) => decode_reservoir(&fs::read(p)?)?,
                None => {
                    let r = build_reservoir(k, x.dim(), None, common.seed.unwrap_or(0))?;
                    fs::write(dir.join("reservoir.bin"), encode_reservoir(&r))?;
                    r
                }
            };
            reservoir.features(&x)?
        }
        FeatureKind::Tsig => SignatureFeatures::new(x.dim(), order, false)?.features(&x)?,
    };
    write_csv(&f, PathCsvKind::Features, &dir.join("features.csv"))?;
    println!("wrote {} feature columns to {}", f.dim(), dir.join("features.csv").display());
    Ok(())
}

fn train(common: &Common) -> Result<()> {
    let cfg = common.config(None)?;
    let outcome = train_pipeline(&cfg.pipeline_config()?)?;
    let dir = common.out_dir("out/train")?;
    let model = ModelFile { readout: outcome.trained.model.clone(), reservoir: outcome.reservoir };
    fs::write(dir.join("model.bin"), encode_model(&model))?;
    let eval = &outcome.trained.evaluation;
    let mut csv = String::from("trajectory_id,rel_l2\n");
    for (i, e) in eval.errors.iter().enumerate() {
        csv += &format!("{i},{e}\n");
    }
    csv += &format!("mean,{}\n", eval.mean);
    fs::write(dir.join("metrics.csv"), csv)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    println!("relative l2 error: {:.4e} +- {:.4e}", eval.mean, eval.std);
    Ok(())
}

fn predict(common: &Common, input: &FsPath, model: &FsPath) -> Result<()> {
    let model = decode_model(&fs::read(model)?)?;
    let x = read_csv(input)?;
    let y = model.readout.predict(&model.reservoir.features(&x)?)?;
    let dir = common.out_dir("out/predict")?;
    write_csv(&y, PathCsvKind::Trajectory, &dir.join("prediction.csv"))?;
    println!("wrote {}", dir.join("prediction.csv").display());
    Ok(())
}

fn run_experiment(common: &Common, preset: Preset) -> Result<()> {
    let cfg = common.config(Some(preset))?;
    let report = experiment::run(&cfg)?;
    let dir = match &common.out {
        Some(d) => d.clone(),
        None => PathBuf::from(&cfg.output.dir),
    };
    report.write_to(&dir)?;
    print!("{}", report.summary_text());
    println!("\nreport written to {}", dir.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate { count } => simulate(c, *count),
        Command::Features { input, kind, k, order, reservoir } => {
            features(c, input, *kind, *k, *order, reservoir.as_deref())
        }
        Command::Train => train(c),
        Command::Predict { input, model } => predict(c, input, model),
        Command::Experiment { preset } => run_experiment(c, *preset),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Format(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
