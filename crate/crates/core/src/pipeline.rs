//! End-to-end training: simulate data, extract features, fit the readout and
//! evaluate on held-out controls.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::dynamics::{
    add_observation_noise, simulate_enzyme, simulate_fou, simulate_langevin, EnzymeParams, FouParams, LangevinParams,
};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::paths::{
    irregular_grid, regular_grid, sample_brownian, time_augment, transform_path, FbmSampler, Path, PathTransform,
    TimeGrid,
};
use crate::readout::{mean_std, relative_l2, ridge_fit, stack, NormalEquations, ReadoutModel};
use crate::rng::{SeedStream, SimRng, Stream};
use crate::rsig::{default_activation, Activation, Reservoir};

/// Default ridge penalty.
pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// Feature values held in memory at once while streaming a fit.
const BATCH_FLOATS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    /// Fractional OU driven by fBm; the control is `[t, B]`.
    Fou { params: FouParams, hurst: f64 },
    /// Double-well Langevin driven by Brownian motion; the control is `[t, W]`.
    Langevin(LangevinParams),
    /// Enzyme kinetics with an injection obtained by applying `law` in order
    /// to a Brownian path `W`; the control is `[t, injection]`.
    Enzyme { params: EnzymeParams, law: Vec<PathTransform> },
}

impl SystemSpec {
    pub fn noise_dim(&self) -> usize {
        match self {
            SystemSpec::Fou { params, .. } => params.dim(),
            SystemSpec::Langevin(_) | SystemSpec::Enzyme { .. } => 1,
        }
    }

    pub fn control_dim(&self) -> usize {
        self.noise_dim() + 1
    }

    pub fn output_dim(&self) -> usize {
        match self {
            SystemSpec::Fou { params, .. } => params.dim(),
            SystemSpec::Langevin(_) | SystemSpec::Enzyme { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Regular {
        t_end: f64,
        steps: usize,
    },
    /// Fresh random grid on `[0, 1]` with `points` points for every trajectory.
    Irregular {
        points: usize,
    },
}

impl GridSpec {
    pub fn points(&self) -> usize {
        match *self {
            GridSpec::Regular { steps, .. } => steps + 1,
            GridSpec::Irregular { points } => points,
        }
    }
}

/// One control and its clean simulated response.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub control: Path,
    pub target: Path,
}

/// Draws controls and ground-truth responses for one system.
#[derive(Debug, Clone)]
pub struct Simulator {
    system: SystemSpec,
    grid: GridSpec,
    fixed: Option<Arc<TimeGrid>>,
    fbm: Option<FbmSampler>,
}

impl Simulator {
    pub fn new(system: SystemSpec, grid: GridSpec) -> Result<Self> {
        let fixed = match grid {
            GridSpec::Regular { t_end, steps } => Some(Arc::new(regular_grid(t_end, steps)?)),
            GridSpec::Irregular { points } => {
                if points < 3 {
                    return Err(Error::invalid("irregular grids need at least 3 points"));
                }
                None
            }
        };
        let fbm = match (&system, &fixed) {
            (SystemSpec::Fou { hurst, .. }, Some(g)) => Some(FbmSampler::new(Arc::clone(g), *hurst)?),
            (SystemSpec::Fou { hurst, .. }, None) => {
                crate::paths::FbmSpec::new(*hurst, 1)?;
                None
            }
            _ => None,
        };
        Ok(Self { system, grid, fixed, fbm })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Simulates one sample; on irregular grids the grid comes from `rng` first.
    pub fn sample(&self, rng: &mut SimRng) -> Result<Sample> {
        let grid = match &self.fixed {
            Some(g) => Arc::clone(g),
            None => Arc::new(irregular_grid(self.grid.points(), rng)?),
        };
        match &self.system {
            SystemSpec::Fou { params, hurst } => {
                let noise = match &self.fbm {
                    Some(s) => s.sample(params.dim(), true, rng)?,
                    None => FbmSampler::new(Arc::clone(&grid), *hurst)?.sample(params.dim(), true, rng)?,
                };
                let target = simulate_fou(params, &noise)?;
                Ok(Sample { control: time_augment(&noise), target })
            }
            SystemSpec::Langevin(params) => {
                let noise = sample_brownian(&grid, 1, rng)?;
                let target = simulate_langevin(params, &noise)?;
                Ok(Sample { control: time_augment(&noise), target })
            }
            SystemSpec::Enzyme { params, law } => {
                let mut injection = sample_brownian(&grid, 1, rng)?;
                for t in law {
                    injection = transform_path(&injection, *t)?;
                }
                let target = simulate_enzyme(params, &injection)?;
                Ok(Sample { control: time_augment(&injection), target })
            }
        }
    }

    /// `count` samples where item `i` uses generator `(stream, i)` of `seeds`.
    pub fn samples(&self, seeds: SeedStream, stream: Stream, count: usize) -> Result<Vec<Sample>> {
        (0..count).map(|i| self.sample(&mut seeds.rng(stream, i as u64))).collect()
    }
}

/// Training and test samples plus the (possibly noisy) training targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub train_targets: Vec<Path>,
    pub test: Vec<Sample>,
}

impl Dataset {
    /// Observation noise of the given variance is added to training targets only.
    pub fn generate(sim: &Simulator, n_train: usize, n_test: usize, noise_variance: f64, seed: u64) -> Result<Self> {
        if n_train == 0 {
            return Err(Error::invalid("need at least one training trajectory"));
        }
        let seeds = SeedStream::new(seed);
        let train = sim.samples(seeds, Stream::TrainControls, n_train)?;
        let test = sim.samples(seeds, Stream::TestControls, n_test)?;
        let train_targets = train
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if noise_variance == 0.0 {
                    Ok(s.target.clone())
                } else {
                    add_observation_noise(&s.target, noise_variance, &mut seeds.rng(Stream::ObservationNoise, i as u64))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { train, train_targets, test })
    }

    pub fn train_pairs(&self) -> (Vec<&Path>, Vec<&Path>) {
        (self.train.iter().map(|s| &s.control).collect(), self.train_targets.iter().collect())
    }
}

/// Fails if `required` bytes exceed `budget`.
pub fn check_budget(what: &str, required: u64, budget: u64) -> Result<()> {
    if required > budget {
        return Err(Error::MemoryBudget { what: what.to_string(), required, budget });
    }
    Ok(())
}

fn batch_size(len: usize, k: usize) -> usize {
    (BATCH_FLOATS / (len * k).max(1)).max(1)
}

/// Fits a ridge readout from `controls` to `targets` through `map`.
///
/// Overdetermined problems stream `ZᵀZ` so features are never held in full;
/// underdetermined ones are stacked and solved in dual form.
pub fn fit_readout<F: FeatureMap + ?Sized>(
    map: &F,
    controls: &[&Path],
    targets: &[&Path],
    lambda: f64,
) -> Result<ReadoutModel> {
    if controls.is_empty() || controls.len() != targets.len() {
        return Err(Error::invalid("need matching, non-empty control and target lists"));
    }
    let k = map.feature_dim();
    let m = targets[0].dim();
    let skip = map.washout();
    let rows: usize = controls.iter().map(|x| x.len().saturating_sub(skip)).sum();
    if rows == 0 {
        return Err(Error::invalid("washout removes every training row"));
    }
    let batch = batch_size(controls[0].len(), k);
    if rows >= k {
        let mut normal = NormalEquations::new(k, m);
        for (xs, ys) in controls.chunks(batch).zip(targets.chunks(batch)) {
            for (f, y) in map.features_batch(xs)?.iter().zip(ys) {
                normal.add_trajectory(f, y, skip)?;
            }
        }
        normal.solve(lambda)
    } else {
        let mut pairs = Vec::with_capacity(controls.len());
        for (xs, ys) in controls.chunks(batch).zip(targets.chunks(batch)) {
            for (f, y) in map.features_batch(xs)?.into_iter().zip(ys) {
                pairs.push(drop_rows(f, (*y).clone(), skip)?);
            }
        }
        ridge_fit(&stack(&pairs)?, lambda)
    }
}

fn drop_rows(f: Path, y: Path, skip: usize) -> Result<(Path, Path)> {
    if skip == 0 {
        return Ok((f, y));
    }
    let times = f.times()[skip..].to_vec();
    let grid = Arc::new(TimeGrid::new(times).map_err(|_| Error::invalid("washout leaves too few rows"))?);
    let (kf, ky) = (f.dim(), y.dim());
    let fv = f.values()[skip * kf..].to_vec();
    let yv = y.values()[skip * ky..].to_vec();
    Ok((Path::new(Arc::clone(&grid), kf, fv)?, Path::new(grid, ky, yv)?))
}

/// Per-trajectory relative errors on a test set, their mean and population
/// std, and the pooled error over all points.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub errors: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub pooled: f64,
}

impl Evaluation {
    pub fn from_errors(errors: Vec<f64>, pooled: f64) -> Self {
        let (mean, std) = mean_std(&errors);
        Self { errors, mean, std, pooled }
    }
}

/// Predictions of `model` for every control in `samples`.
pub fn predict_all<F: FeatureMap + ?Sized>(map: &F, model: &ReadoutModel, controls: &[&Path]) -> Result<Vec<Path>> {
    if controls.is_empty() {
        return Ok(Vec::new());
    }
    let batch = batch_size(controls[0].len(), map.feature_dim());
    let mut out = Vec::with_capacity(controls.len());
    for xs in controls.chunks(batch) {
        for f in map.features_batch(xs)? {
            out.push(model.predict(&f)?);
        }
    }
    Ok(out)
}

/// Evaluates against the clean targets of `samples`. Predictions are returned
/// when `keep` is set.
pub fn evaluate<F: FeatureMap + ?Sized>(
    map: &F,
    model: &ReadoutModel,
    samples: &[Sample],
    keep: bool,
) -> Result<(Evaluation, Vec<Path>)> {
    if samples.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let batch = batch_size(samples[0].control.len(), map.feature_dim());
    let mut errors = Vec::with_capacity(samples.len());
    let mut kept = Vec::new();
    let (mut diff2, mut norm2) = (0.0, 0.0);
    for chunk in samples.chunks(batch) {
        let xs: Vec<&Path> = chunk.iter().map(|s| &s.control).collect();
        for (f, s) in map.features_batch(&xs)?.iter().zip(chunk) {
            let pred = model.predict(f)?;
            errors.push(relative_l2(&pred, &s.target)?);
            for (p, t) in pred.values().iter().zip(s.target.values()) {
                diff2 += (p - t) * (p - t);
                norm2 += t * t;
            }
            if keep {
                kept.push(pred);
            }
        }
    }
    Ok((Evaluation::from_errors(errors, (diff2 / norm2).sqrt()), kept))
}

/// A fitted model, its test evaluation and wall-clock cost.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ReadoutModel,
    pub evaluation: Evaluation,
    pub predictions: Vec<Path>,
    pub fit_seconds: f64,
}

pub fn train_and_evaluate<F: FeatureMap + ?Sized>(
    map: &F,
    data: &Dataset,
    lambda: f64,
    keep_predictions: bool,
) -> Result<Trained> {
    let (xs, ys) = data.train_pairs();
    let start = Instant::now();
    let model = fit_readout(map, &xs, &ys, lambda)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let (evaluation, predictions) = evaluate(map, &model, &data.test, keep_predictions)?;
    Ok(Trained { model, evaluation, predictions, fit_seconds })
}

/// Everything [`train_pipeline`] needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub system: SystemSpec,
    pub grid: GridSpec,
    pub k: usize,
    /// Defaults to the scaled identity with slope `1/(d√k)`.
    pub activation: Option<Activation>,
    pub reservoir_seed: u64,
    pub lambda: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub observation_noise: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub reservoir: Reservoir,
    pub trained: Trained,
}

pub fn build_reservoir(k: usize, d: usize, activation: Option<Activation>, seed: u64) -> Result<Reservoir> {
    if k == 0 || d == 0 {
        return Err(Error::invalid("reservoir sizes must be positive"));
    }
    Reservoir::generate(k, d, activation.unwrap_or_else(|| default_activation(k, d)), seed)
}

/// Simulates data, generates the reservoir, fits and evaluates.
pub fn train_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let sim = Simulator::new(cfg.system.clone(), cfg.grid)?;
    let data = Dataset::generate(&sim, cfg.n_train, cfg.n_test, cfg.observation_noise, cfg.data_seed)?;
    let reservoir = build_reservoir(cfg.k, cfg.system.control_dim(), cfg.activation, cfg.reservoir_seed)?;
    let trained = train_and_evaluate(&reservoir, &data, cfg.lambda, false)?;
    Ok(PipelineOutcome { reservoir, trained })
}

/// Picks `k` from `candidates` by validation error on a held-out tail of the
/// training set (`holdout` fraction, e.g. 0.2). Returns the best `k` and the
/// error of every candidate.
pub fn select_k(
    candidates: &[usize],
    data: &Dataset,
    holdout: f64,
    lambda: f64,
    mut make_map: impl FnMut(usize) -> Result<Reservoir>,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate k values"));
    }
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(Error::invalid(format!("holdout fraction must lie in (0, 1), got {holdout}")));
    }
    let n = data.train.len();
    let n_val = ((n as f64) * holdout).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::invalid("training set too small to hold out a validation split"));
    }
    let n_fit = n - n_val;
    let xs: Vec<&Path> = data.train[..n_fit].iter().map(|s| &s.control).collect();
    let ys: Vec<&Path> = data.train_targets[..n_fit].iter().collect();
    let validation = &data.train[n_fit..];
    let mut scores = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let map = make_map(k)?;
        let model = fit_readout(&map, &xs, &ys, lambda)?;
        let (eval, _) = evaluate(&map, &model, validation, false)?;
        scores.push((k, eval.mean));
    }
    let best = scores.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(k, _)| k).expect("non-empty");
    Ok((best, scores))
}

/// Row-stacks per-time feature rows of `paths` into one matrix.
pub fn stack_rows(paths: &[&Path]) -> DMatrix<f64> {
    let k = paths.first().map_or(0, |p| p.dim());
    let rows: usize = paths.iter().map(|p| p.len()).sum();
    let mut data = Vec::with_capacity(rows * k);
    for p in paths {
        data.extend_from_slice(p.values());
    }
    DMatrix::from_row_slice(rows, k, &data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::{Esn, EsnParams};

    fn fou_sim() -> Simulator {
        let params = FouParams::scalar(2.0, 1.0, 2.0, 1.0).unwrap();
        Simulator::new(SystemSpec::Fou { params, hurst: 0.3 }, GridSpec::Regular { t_end: 1.0, steps: 20 }).unwrap()
    }

    #[test]
    fn dataset_is_deterministic_and_noise_only_on_train() {
        let sim = fou_sim();
        let a = Dataset::generate(&sim, 4, 3, 0.01, 5).unwrap();
        let b = Dataset::generate(&sim, 4, 3, 0.01, 5).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.train_targets, b.train_targets);
        assert_ne!(a.train_targets[0], a.train[0].target);
        assert_ne!(a.train[0], a.test[0]);
        assert_eq!(a.train[0].control.dim(), 2);
    }

    #[test]
    fn irregular_grids_differ_per_trajectory() {
        let sim = Simulator::new(
            SystemSpec::Langevin(LangevinParams::new(2.0, 1.0, 1.0, 1.0).unwrap()),
            GridSpec::Irregular { points: 11 },
        )
        .unwrap();
        let s = sim.samples(SeedStream::new(1), Stream::TrainControls, 2).unwrap();
        assert_ne!(s[0].control.times(), s[1].control.times());
        assert_eq!(s[0].control.len(), 11);
        assert_eq!(s[0].control.column(0), s[0].control.times());
    }

    #[test]
    fn realizable_target_is_recovered() {
        let sim = fou_sim();
        let data = Dataset::generate(&sim, 5, 3, 0.0, 2).unwrap();
        let r = build_reservoir(8, 2, None, 3).unwrap();
        let coord = |x: &Path| {
            let z = r.evolve(x).unwrap();
            Path::new(z.grid().clone(), 1, z.column(0)).unwrap()
        };
        let xs: Vec<&Path> = data.train.iter().map(|s| &s.control).collect();
        let ys: Vec<Path> = xs.iter().map(|x| coord(x)).collect();
        let yr: Vec<&Path> = ys.iter().collect();
        let model = fit_readout(&r, &xs, &yr, 1e-12).unwrap();
        for s in &data.test {
            let pred = model.predict(&r.evolve(&s.control).unwrap()).unwrap();
            assert!(relative_l2(&pred, &coord(&s.control)).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn streamed_and_dual_paths_agree_with_stacking() {
        let sim = fou_sim();
        let data = Dataset::generate(&sim, 3, 1, 0.0, 9).unwrap();
        let (xs, ys) = data.train_pairs();
        for k in [10, 80] {
            let r = build_reservoir(k, 2, None, 1).unwrap();
            let pairs: Vec<(Path, Path)> =
                xs.iter().zip(&ys).map(|(x, y)| (r.evolve(x).unwrap(), (*y).clone())).collect();
            let direct = ridge_fit(&stack(&pairs).unwrap(), 1e-3).unwrap();
            let fitted = fit_readout(&r, &xs, &ys, 1e-3).unwrap();
            let diff = (direct.beta() - fitted.beta()).norm() / direct.beta().norm();
            assert!(diff < 1e-8, "k={k} diff={diff}");
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let cfg = PipelineConfig {
            system: fou_sim().system().clone(),
            grid: GridSpec::Regular { t_end: 1.0, steps: 20 },
            k: 12,
            activation: None,
            reservoir_seed: 4,
            lambda: DEFAULT_LAMBDA,
            n_train: 6,
            n_test: 4,
            data_seed: 8,
            observation_noise: 0.0,
        };
        let a = train_pipeline(&cfg).unwrap();
        let b = train_pipeline(&cfg).unwrap();
        assert_eq!(a.trained.model, b.trained.model);
        assert_eq!(a.trained.evaluation, b.trained.evaluation);
        assert_eq!(a.trained.evaluation.errors.len(), 4);
    }

    #[test]
    fn esn_washout_drops_rows() {
        let sim = fou_sim();
        let data = Dataset::generate(&sim, 4, 2, 0.0, 1).unwrap();
        let esn = Esn::new(EsnParams { size: 10, washout: 5, ..EsnParams::baseline(1) }, 2).unwrap();
        let t = train_and_evaluate(&esn, &data, 1e-3, true).unwrap();
        assert_eq!(t.predictions.len(), 2);
        assert!(t.evaluation.mean.is_finite());
    }

    #[test]
    fn select_k_scores_every_candidate() {
        let sim = fou_sim();
        let data = Dataset::generate(&sim, 10, 0, 0.0, 1).unwrap();
        let (best, scores) = select_k(&[2, 8, 16], &data, 0.2, 1e-3, |k| build_reservoir(k, 2, None, 0)).unwrap();
        assert_eq!(scores.len(), 3);
        assert!(scores.iter().any(|&(k, _)| k == best));
        assert!(select_k(&[2], &data, 0.0, 1e-3, |k| build_reservoir(k, 2, None, 0)).is_err());
    }

    #[test]
    fn budget_guard() {
        assert!(check_budget("x", 10, 10).is_ok());
        assert!(matches!(check_budget("x", 11, 10), Err(Error::MemoryBudget { .. })));
    }

    #[test]
    fn enzyme_control_is_time_augmented_injection() {
        let sim = Simulator::new(
            SystemSpec::Enzyme { params: EnzymeParams::standard(), law: vec![PathTransform::Square] },
            GridSpec::Regular { t_end: 1.0, steps: 50 },
        )
        .unwrap();
        let s = sim.sample(&mut SeedStream::new(0).rng(Stream::TestControls, 0)).unwrap();
        assert_eq!(s.control.dim(), 2);
        assert!(s.control.column(1).iter().all(|&v| v >= 0.0));
        assert_eq!(s.target.dim(), 1);
    }
}
