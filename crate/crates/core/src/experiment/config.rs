//! Experiment configuration: TOML schema, preset defaults and overrides.
//!
//! A user file only needs the keys it changes; everything else is filled in
//! from the defaults of its preset.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{EnzymeParams, FouParams, LangevinParams};
use crate::error::{Error, Result};
use crate::esn::EsnParams;
use crate::paths::PathTransform;
use crate::pipeline::{GridSpec, PipelineConfig, SystemSpec};
use crate::rsig::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Robustness,
    Compression,
    RsigVsTsig,
    BaselineCompare,
    EnzymeOod,
    IrregularGrid,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Robustness,
        Preset::Compression,
        Preset::RsigVsTsig,
        Preset::BaselineCompare,
        Preset::EnzymeOod,
        Preset::IrregularGrid,
        Preset::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Robustness => "robustness",
            Preset::Compression => "compression",
            Preset::RsigVsTsig => "rsig_vs_tsig",
            Preset::BaselineCompare => "baseline_compare",
            Preset::EnzymeOod => "enzyme_ood",
            Preset::IrregularGrid => "irregular_grid",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::invalid(format!("unknown preset '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub preset: Preset,
    /// Reservoir seeds; one run per seed.
    pub seeds: Vec<u64>,
    /// Seed for controls, grids and observation noise.
    pub data_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub full_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionLaw {
    /// `W²`
    Square,
    /// `scale · 1{W² > level}`
    SquareThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSection {
    Fou {
        hurst: f64,
        /// Use `Θ_ij = i/j`, `Σ = I`, `μ = 1`, `y0 = 1` in this dimension
        /// instead of the explicit matrices below.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ratio_dim: Option<usize>,
        mu: Vec<f64>,
        theta: Vec<Vec<f64>>,
        sigma: Vec<Vec<f64>>,
        y0: Vec<f64>,
    },
    Langevin {
        mu: f64,
        theta: f64,
        sigma: f64,
        y0: f64,
    },
    Enzyme {
        k1: f64,
        k_neg1: f64,
        k2: f64,
        initial: [f64; 3],
        substeps: usize,
        law: InjectionLaw,
        level: f64,
        scale: f64,
    },
}

fn matrix(rows: &[Vec<f64>], m: usize, what: &str) -> Result<nalgebra::DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(format!("{what} must be {m}x{m}")));
    }
    Ok(nalgebra::DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

impl SystemSection {
    pub fn scalar_fou(mu: f64, theta: f64, sigma: f64, y0: f64, hurst: f64) -> Self {
        SystemSection::Fou {
            hurst,
            ratio_dim: None,
            mu: vec![mu],
            theta: vec![vec![theta]],
            sigma: vec![vec![sigma]],
            y0: vec![y0],
        }
    }

    pub fn to_spec(&self) -> Result<SystemSpec> {
        Ok(match self {
            SystemSection::Fou { hurst, ratio_dim: Some(m), .. } => {
                SystemSpec::Fou { params: FouParams::ratio_preset(*m)?, hurst: *hurst }
            }
            SystemSection::Fou { hurst, ratio_dim: None, mu, theta, sigma, y0 } => {
                let m = mu.len();
                let params = FouParams::new(
                    nalgebra::DVector::from_column_slice(mu),
                    matrix(theta, m, "theta")?,
                    matrix(sigma, m, "sigma")?,
                    nalgebra::DVector::from_column_slice(y0),
                )?;
                SystemSpec::Fou { params, hurst: *hurst }
            }
            SystemSection::Langevin { mu, theta, sigma, y0 } => {
                SystemSpec::Langevin(LangevinParams::new(*mu, *theta, *sigma, *y0)?)
            }
            SystemSection::Enzyme { k1, k_neg1, k2, initial, substeps, law, level, scale } => {
                let params = EnzymeParams::new(*k1, *k_neg1, *k2, (initial[0], initial[1], initial[2]))?
                    .with_substeps(*substeps)?;
                SystemSpec::Enzyme { params, law: injection(*law, *level, *scale) }
            }
        })
    }
}

/// Transforms applied in order to the Brownian driver for an injection law.
pub fn injection(law: InjectionLaw, level: f64, scale: f64) -> Vec<PathTransform> {
    match law {
        InjectionLaw::Square => vec![PathTransform::Square],
        InjectionLaw::SquareThreshold => vec![PathTransform::Square, PathTransform::ThresholdStep { level, scale }],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSection {
    Regular { t_end: f64, steps: usize },
    Irregular { points: usize },
}

impl GridSection {
    pub fn to_spec(self) -> GridSpec {
        match self {
            GridSection::Regular { t_end, steps } => GridSpec::Regular { t_end, steps },
            GridSection::Irregular { points } => GridSpec::Irregular { points },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    ScaledIdentity,
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSection {
    pub k: usize,
    pub activation: ActivationKind,
    /// Slope of the scaled identity; defaults to `1/(d√k)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

impl ReservoirSection {
    /// `None` means the default scaled identity.
    pub fn activation(&self) -> Result<Option<Activation>> {
        Ok(match (self.activation, self.slope) {
            (ActivationKind::ScaledIdentity, None) => None,
            (ActivationKind::ScaledIdentity, Some(s)) => Some(Activation::scaled_identity(s)?),
            (ActivationKind::Tanh, _) => Some(Activation::Tanh),
            (ActivationKind::Sigmoid, _) => Some(Activation::Sigmoid),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    pub lambda: f64,
    /// Variance of white noise added to training targets.
    pub observation_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Test trajectories written out as plot data.
    pub sample_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionSection {
    /// Control dimension `d` (time plus `d - 1` Brownian components).
    pub dim: usize,
    pub order: usize,
    pub steps: usize,
    pub k_values: Vec<usize>,
    pub lambda: f64,
    /// Error level whose smallest reaching `k` is reported.
    pub target_error: f64,
    pub memory_budget_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSection {
    pub m_values: Vec<usize>,
    pub n_train_values: Vec<usize>,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrregularSection {
    /// `(points, k)` cells of the table.
    pub cells: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnSection {
    pub size: usize,
    pub spectral_radius: f64,
    pub leak_rate: f64,
    pub input_scaling: f64,
    pub washout: usize,
}

impl EsnSection {
    pub fn params(&self, seed: u64) -> EsnParams {
        EsnParams {
            size: self.size,
            spectral_radius: self.spectral_radius,
            leak_rate: self.leak_rate,
            input_scaling: self.input_scaling,
            seed,
            washout: self.washout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodSection {
    pub law: InjectionLaw,
    pub level: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub system: SystemSection,
    pub grid: GridSection,
    pub reservoir: ReservoirSection,
    pub readout: ReadoutSection,
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression: Option<CompressionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irregular: Option<IrregularSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub esn: Option<EsnSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood: Option<OodSection>,
}

const GIB: u64 = 1 << 30;

fn regular(steps: usize) -> GridSection {
    GridSection::Regular { t_end: 1.0, steps }
}

fn rs(k: usize) -> ReservoirSection {
    ReservoirSection { k, activation: ActivationKind::ScaledIdentity, slope: None }
}

impl ExperimentConfig {
    /// Defaults of a preset at desk scale, or at full scale when `full_scale`.
    pub fn preset(preset: Preset, full_scale: bool) -> Self {
        let experiment =
            ExperimentSection { preset, seeds: vec![0], data_seed: 0, n_train: 1000, n_test: 1000, full_scale };
        let mut cfg = ExperimentConfig {
            experiment,
            system: SystemSection::scalar_fou(2.0, 1.0, 2.0, 1.0, 0.1),
            grid: regular(100),
            reservoir: rs(50),
            readout: ReadoutSection { lambda: crate::pipeline::DEFAULT_LAMBDA, observation_noise: 0.0 },
            output: OutputSection { dir: format!("out/{}", preset.name()), sample_trajectories: 3 },
            compression: None,
            comparison: None,
            irregular: None,
            esn: None,
            ood: None,
        };
        match preset {
            Preset::Robustness => {
                cfg.experiment.seeds = (0..10).collect();
                cfg.experiment.n_train = 100;
                cfg.experiment.n_test = 100;
                cfg.system = SystemSection::scalar_fou(2.0, 1.0, 2.0, 1.0, 0.2);
                cfg.reservoir = rs(100);
                cfg.readout.observation_noise = 0.01;
            }
            Preset::Compression => {
                cfg.experiment.n_train = 1;
                cfg.experiment.n_test = 0;
                let (dim, order) = if full_scale { (10, 6) } else { (5, 4) };
                let k_values = if full_scale {
                    vec![10, 25, 50, 75, 90, 100, 110, 125, 150, 175, 190, 200]
                } else {
                    vec![5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 101, 120, 150, 200, 300, 400, 600, 780]
                };
                cfg.compression = Some(CompressionSection {
                    dim,
                    order,
                    steps: 100,
                    k_values,
                    lambda: 0.0,
                    target_error: if full_scale { 1e-4 } else { 1e-3 },
                    memory_budget_bytes: 4 * GIB,
                });
            }
            Preset::RsigVsTsig => {
                cfg.experiment.n_test = 100;
                cfg.system = SystemSection::Fou {
                    hurst: 0.3,
                    ratio_dim: Some(1),
                    mu: vec![1.0],
                    theta: vec![vec![1.0]],
                    sigma: vec![vec![1.0]],
                    y0: vec![1.0],
                };
                cfg.comparison = Some(ComparisonSection {
                    m_values: if full_scale { vec![20, 40, 60, 80] } else { vec![5, 10, 20] },
                    n_train_values: vec![20, 50],
                    order: 3,
                });
            }
            Preset::BaselineCompare => {
                cfg.esn =
                    Some(EsnSection { size: 50, spectral_radius: 0.7, leak_rate: 0.4, input_scaling: 1.0, washout: 0 });
            }
            Preset::EnzymeOod => {
                cfg.experiment.n_train = if full_scale { 100_000 } else { 10_000 };
                cfg.experiment.n_test = 1000;
                let std = EnzymeParams::standard();
                cfg.system = SystemSection::Enzyme {
                    k1: std.k1,
                    k_neg1: std.k_neg1,
                    k2: std.k2,
                    initial: [std.s0, std.c0, std.y0],
                    substeps: std.substeps,
                    law: InjectionLaw::Square,
                    level: 0.5,
                    scale: 0.5,
                };
                cfg.reservoir = rs(222);
                cfg.ood = Some(OodSection { law: InjectionLaw::SquareThreshold, level: 0.5, scale: 0.5 });
            }
            Preset::IrregularGrid => {
                cfg.experiment.n_train = 10_000;
                cfg.experiment.n_test = if full_scale { 10_000 } else { 1000 };
                cfg.system = SystemSection::Langevin { mu: 2.0, theta: 1.0, sigma: 1.0, y0: 1.0 };
                let mut cells = vec![[11, 111], [101, 222]];
                if full_scale {
                    cells.push([1001, 332]);
                }
                cfg.irregular = Some(IrregularSection { cells });
            }
            Preset::Custom => {
                cfg.experiment.n_train = 100;
                cfg.experiment.n_test = 100;
                cfg.system = SystemSection::scalar_fou(2.0, 1.0, 2.0, 1.0, 0.2);
                cfg.reservoir = rs(100);
            }
        }
        cfg
    }

    /// Parses a TOML document over the defaults of its preset.
    ///
    /// The preset comes from `preset` if given, else from
    /// `[experiment] preset`, else `custom`. `full_scale` set to true forces
    /// the full-scale defaults.
    pub fn from_toml_str(text: &str, preset: Option<Preset>, full_scale: bool) -> Result<Self> {
        let user: toml::Table = text.parse::<toml::Table>()?;
        let section = user.get("experiment").and_then(|v| v.as_table());
        let file_preset = section
            .and_then(|t| t.get("preset"))
            .map(|v| v.as_str().ok_or_else(|| Error::format("experiment.preset must be a string")))
            .transpose()?
            .map(Preset::from_str)
            .transpose()?;
        let file_full = section.and_then(|t| t.get("full_scale")).and_then(|v| v.as_bool()).unwrap_or(false);
        let preset = preset.or(file_preset).unwrap_or(Preset::Custom);
        let mut base = toml::Table::try_from(Self::preset(preset, full_scale || file_full))
            .map_err(|e| Error::format(format!("cannot encode defaults: {e}")))?;
        // A system or grid of another kind replaces the default wholesale.
        for key in ["system", "grid"] {
            let kind = |t: &toml::Table| t.get(key).and_then(|s| s.get("kind")).cloned();
            if let Some(k) = kind(&user) {
                if kind(&base).as_ref() != Some(&k) {
                    base.remove(key);
                }
            }
        }
        merge(&mut base, user);
        let mut cfg: ExperimentConfig =
            toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| Error::format(e.to_string()))?;
        cfg.experiment.preset = preset;
        cfg.experiment.full_scale |= full_scale;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses `seed` both for the data and as the only reservoir seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.experiment.data_seed = seed;
        self.experiment.seeds = vec![seed];
        self
    }

    /// Single-model pipeline settings using the first reservoir seed.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            system: self.system.to_spec()?,
            grid: self.grid.to_spec(),
            k: self.reservoir.k,
            activation: self.reservoir.activation()?,
            reservoir_seed: self.experiment.seeds[0],
            lambda: self.readout.lambda,
            n_train: self.experiment.n_train,
            n_test: self.experiment.n_test,
            data_seed: self.experiment.data_seed,
            observation_noise: self.readout.observation_noise,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(format!("cannot encode config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.seeds.is_empty() {
            return Err(Error::invalid("experiment.seeds must not be empty"));
        }
        if self.reservoir.k == 0 {
            return Err(Error::invalid("reservoir.k must be at least 1"));
        }
        if !(self.readout.lambda.is_finite() && self.readout.lambda >= 0.0) {
            return Err(Error::invalid("readout.lambda must be nonnegative"));
        }
        if !(self.readout.observation_noise.is_finite() && self.readout.observation_noise >= 0.0) {
            return Err(Error::invalid("readout.observation_noise must be nonnegative"));
        }
        self.reservoir.activation()?;
        self.system.to_spec()?;
        match self.grid {
            GridSection::Regular { t_end, steps } => {
                crate::paths::regular_grid(t_end, steps)?;
            }
            GridSection::Irregular { points } if points < 3 => {
                return Err(Error::invalid("irregular grids need at least 3 points"));
            }
            GridSection::Irregular { .. } => {}
        }
        let need = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::invalid(format!("preset {} needs a [{name}] section", self.experiment.preset)))
            }
        };
        match self.experiment.preset {
            Preset::Compression => need(self.compression.is_some(), "compression")?,
            Preset::RsigVsTsig => need(self.comparison.is_some(), "comparison")?,
            Preset::BaselineCompare => need(self.esn.is_some(), "esn")?,
            Preset::EnzymeOod => {
                need(self.ood.is_some(), "ood")?;
                if !matches!(self.system, SystemSection::Enzyme { .. }) {
                    return Err(Error::invalid("enzyme_ood needs an enzyme system"));
                }
            }
            Preset::IrregularGrid => need(self.irregular.is_some(), "irregular")?,
            Preset::Robustness | Preset::Custom => {}
        }
        if let Some(esn) = &self.esn {
            esn.params(0).validate()?;
        }
        Ok(())
    }
}

/// Recursively overlays `over` onto `base`; tables merge, everything else replaces.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
