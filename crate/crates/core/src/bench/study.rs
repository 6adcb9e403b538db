//! The rigid ellipsoid study.
//!
//! Every trial targets the pose `[0, 0, 0, y, y, y]` with `y` uniform in
//! `(-pi, pi)`, samples observations from the target-posed model and fits
//! each arm from the neutral pose. All arms of a trial see the same data.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{angle_bin, rotation_error, Summary};
use super::models::{BenchModel, ModelId};
use super::sampling::{sample_observations, SamplingSpec};
use super::{host_info, thread_pool, trial_seed, version_string, BenchError};
use crate::energy::{Damping, FitConfig, Optimizer};
use crate::kinematics::PoseModel;
use crate::solvers::run_fit;
use crate::surfaces::SurfaceKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub surface: SurfaceKind,
    pub optimizer: Optimizer,
    pub lambda_n: f64,
    #[serde(default)]
    pub label: Option<String>,
}

impl ArmSpec {
    pub fn new(surface: SurfaceKind, optimizer: Optimizer, lambda_n: f64) -> Self {
        Self {
            surface,
            optimizer,
            lambda_n,
            label: None,
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}-{}-{}", self.optimizer, self.surface, self.lambda_n))
    }
}

/// Cartesian product of surfaces, optimizers and normal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub surfaces: Vec<SurfaceKind>,
    pub optimizers: Vec<Optimizer>,
    pub lambda_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    #[serde(default = "default_models")]
    pub models: Vec<ModelId>,
    #[serde(default)]
    pub arms: Vec<ArmSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_data_count")]
    pub data_count: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub symmetric_noise: bool,
    #[serde(default = "default_true")]
    pub visible_only: bool,
    /// Iterations reported in the ablation table; the cap is always included.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_bins")]
    pub angle_bins: usize,
    #[serde(default)]
    pub damping: Damping,
    /// Surface the observations are drawn from.
    #[serde(default)]
    pub sampling_surface: SamplingSurface,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
}

/// Where observations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingSurface {
    /// The Phong surface of the fitted model itself.
    #[default]
    Phong,
    /// A Loop-refined approximation of the model's limit surface.
    LoopLimit,
}

fn default_name() -> String {
    "study".into()
}

fn default_models() -> Vec<ModelId> {
    vec![ModelId::Ellipsoid320]
}

fn default_iterations() -> usize {
    50
}

fn default_data_count() -> usize {
    200
}

fn default_noise() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_checkpoints() -> Vec<usize> {
    vec![10]
}

fn default_bins() -> usize {
    24
}

impl StudyConfig {
    /// A config with the full-scale defaults and the given arms.
    pub fn new(seed: u64, trials: usize, arms: Vec<ArmSpec>) -> Self {
        Self {
            name: default_name(),
            seed,
            trials,
            models: default_models(),
            arms,
            grid: None,
            iterations: default_iterations(),
            data_count: default_data_count(),
            noise: default_noise(),
            symmetric_noise: false,
            visible_only: true,
            checkpoints: default_checkpoints(),
            angle_bins: default_bins(),
            damping: Damping::default(),
            sampling_surface: SamplingSurface::Phong,
            jobs: 0,
        }
    }

    /// Explicit arms followed by the grid expansion.
    pub fn all_arms(&self) -> Vec<ArmSpec> {
        let mut arms = self.arms.clone();
        if let Some(g) = &self.grid {
            for &surface in &g.surfaces {
                for &optimizer in &g.optimizers {
                    for &lambda_n in &g.lambda_n {
                        arms.push(ArmSpec::new(surface, optimizer, lambda_n));
                    }
                }
            }
        }
        arms
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |field: &str, msg: &str| Err(BenchError::Config(format!("{field}: {msg}")));
        if self.trials == 0 {
            return fail("trials", "must be at least 1");
        }
        if self.data_count == 0 {
            return fail("data_count", "must be at least 1");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail("noise", "must be finite and nonnegative");
        }
        if self.angle_bins == 0 {
            return fail("angle_bins", "must be at least 1");
        }
        if self.models.is_empty() {
            return fail("models", "at least one model is required");
        }
        if let Some(m) = self.models.iter().find(|m| !m.is_rigid()) {
            return fail("models", &format!("`{m}` is articulated; use the chain study"));
        }
        let arms = self.all_arms();
        if arms.is_empty() {
            return fail("arms", "no arms given (set `arms` or `grid`)");
        }
        for (i, arm) in arms.iter().enumerate() {
            if !(arm.lambda_n >= 0.0 && arm.lambda_n.is_finite()) {
                return fail(&format!("arms[{i}].lambda_n"), "must be finite and nonnegative");
            }
        }
        let mut labels: Vec<_> = arms.iter().map(|a| a.label()).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return fail("arms", &format!("duplicate arm label `{}`", w[0]));
        }
        for c in &self.checkpoints {
            if *c > self.iterations {
                return fail("checkpoints", &format!("{c} exceeds the iteration cap {}", self.iterations));
            }
        }
        Ok(())
    }

    fn fit_config(&self, arm: &ArmSpec) -> FitConfig {
        FitConfig {
            lambda_n: arm.lambda_n,
            surface: arm.surface,
            optimizer: arm.optimizer,
            max_iterations: self.iterations,
            damping: self.damping,
            ..FitConfig::default()
        }
    }

    fn sampling(&self) -> SamplingSpec {
        SamplingSpec {
            count: self.data_count,
            noise: self.noise,
            symmetric_noise: self.symmetric_noise,
            visible_only: self.visible_only,
        }
    }

    fn sorted_checkpoints(&self) -> Vec<usize> {
        let mut c = self.checkpoints.clone();
        c.push(self.iterations);
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Parses a study config, reporting the line and column of any problem.
pub fn parse_study_config(text: &str) -> Result<StudyConfig, BenchError> {
    let config: StudyConfig = serde_json::from_str(text).map_err(|e| BenchError::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// One fit of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub gt_angle_deg: f64,
    /// Error before the first iteration and after each of `iterations`,
    /// holding the final value after convergence.
    pub errors: Vec<f64>,
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub monotone: bool,
    pub truncated_walks: usize,
    pub seconds: Vec<f64>,
}

impl TrialRecord {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("errors include the initial state")
    }
}

#[derive(Debug, Clone)]
pub struct ArmResult {
    pub model: ModelId,
    pub arm: ArmSpec,
    pub trials: Vec<TrialRecord>,
}

impl ArmResult {
    pub fn label(&self) -> String {
        self.arm.label()
    }

    /// Error statistics across trials after `iteration` iterations.
    pub fn summary_at(&self, iteration: usize) -> Summary {
        let e: Vec<f64> = self.trials.iter().map(|t| t.errors[iteration]).collect();
        Summary::of(&e)
    }

    pub fn mean_errors(&self) -> Vec<f64> {
        let n = self.trials.first().map_or(0, |t| t.errors.len());
        (0..n).map(|k| self.summary_at(k).mean).collect()
    }

    /// Final errors grouped into angle bins.
    pub fn binned(&self, bins: usize) -> Vec<Summary> {
        let mut groups = vec![Vec::new(); bins];
        for t in &self.trials {
            groups[angle_bin(t.gt_angle_deg, bins)].push(t.final_error());
        }
        groups.iter().map(|g| Summary::of(g)).collect()
    }

    /// Mean wall time per iteration across trials.
    pub fn mean_iteration_seconds(&self) -> Vec<f64> {
        let n = self.trials.iter().map(|t| t.seconds.len()).max().unwrap_or(0);
        (0..n)
            .map(|k| {
                let s: Vec<f64> = self.trials.iter().filter_map(|t| t.seconds.get(k).copied()).collect();
                s.iter().sum::<f64>() / s.len().max(1) as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub arms: Vec<ArmResult>,
    pub wall_seconds: f64,
}

impl StudyResult {
    pub fn arm(&self, model: ModelId, label: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.model == model && a.label() == label)
    }
}

fn pad(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    let last = *v.last().expect("non-empty trace");
    v.resize(len, last);
    v
}

fn run_trial(
    model: &BenchModel,
    source: &dyn PoseModel,
    config: &StudyConfig,
    arms: &[ArmSpec],
    trial: usize,
) -> Result<Vec<TrialRecord>, BenchError> {
    let seed = trial_seed(config.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let gt = DVector::from_vec(vec![0.0, 0.0, 0.0, y, y, y]);
    let sample = sample_observations(source, &gt, &config.sampling(), &mut rng)?;
    let theta0 = model.neutral();

    arms.iter()
        .map(|arm| {
            let report = run_fit(model.as_model(), &sample.observations, &theta0, &config.fit_config(arm))?;
            let errors = report.theta_trace.iter().map(|t| rotation_error(t, &gt)).collect();
            Ok(TrialRecord {
                trial,
                seed,
                gt_angle_deg: y.to_degrees(),
                errors: pad(errors, config.iterations + 1),
                energies: pad(report.energy_trace.clone(), config.iterations + 1),
                iterations: report.iterations,
                converged: report.converged,
                monotone: report.is_monotone(),
                truncated_walks: report.steps.iter().map(|s| s.truncated_walks).sum(),
                seconds: report.iteration_seconds.clone(),
            })
        })
        .collect()
}

/// Runs every model and arm over all trials.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult, BenchError> {
    config.validate()?;
    let start = Instant::now();
    let arms = config.all_arms();
    let pool = thread_pool(config.jobs)?;
    let mut out = Vec::new();
    for &id in &config.models {
        let model = BenchModel::build(id)?;
        let reference = match config.sampling_surface {
            SamplingSurface::Phong => None,
            SamplingSurface::LoopLimit => BenchModel::reference(id)?,
        };
        let source: &dyn PoseModel = match &reference {
            Some(r) => r,
            None => model.as_model(),
        };
        let per_trial: Vec<Vec<TrialRecord>> = pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|t| run_trial(&model, source, config, &arms, t))
                .collect::<Result<_, _>>()
        })?;
        for (a, arm) in arms.iter().enumerate() {
            out.push(ArmResult {
                model: id,
                arm: arm.clone(),
                trials: per_trial.iter().map(|t| t[a].clone()).collect(),
            });
        }
    }
    Ok(StudyResult {
        config: config.clone(),
        arms: out,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize)]
struct TrialRow<'a> {
    model: &'a str,
    arm: &'a str,
    surface: &'a str,
    optimizer: &'a str,
    lambda_n: f64,
    trial: usize,
    seed: u64,
    gt_angle_deg: f64,
    initial_error_deg: f64,
    final_error_deg: f64,
    iterations: usize,
    converged: bool,
    final_energy: f64,
    monotone: bool,
    truncated_walks: usize,
}

#[derive(Serialize)]
struct IterationRow<'a> {
    model: &'a str,
    arm: &'a str,
    trial: usize,
    iteration: usize,
    error_deg: f64,
    energy: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    model: &'a str,
    arm: &'a str,
    surface: &'a str,
    optimizer: &'a str,
    lambda_n: f64,
    iteration: usize,
    count: usize,
    mean_error_deg: f64,
    stdev: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct BinRow<'a> {
    model: &'a str,
    arm: &'a str,
    surface: &'a str,
    optimizer: &'a str,
    lambda_n: f64,
    bin: usize,
    bin_lo_deg: f64,
    bin_hi_deg: f64,
    count: usize,
    mean_error_deg: f64,
    stdev: f64,
    stderr: f64,
}

fn summary_row<'a>(a: &'a ArmResult, label: &'a str, iteration: usize) -> SummaryRow<'a> {
    let s = a.summary_at(iteration);
    SummaryRow {
        model: a.model.name(),
        arm: label,
        surface: a.arm.surface.name(),
        optimizer: a.arm.optimizer.name(),
        lambda_n: a.arm.lambda_n,
        iteration,
        count: s.count,
        mean_error_deg: s.mean,
        stdev: s.stdev,
        stderr: s.stderr,
    }
}

/// Files written by [`write_study`].
pub const STUDY_FILES: [&str; 5] = ["trials.csv", "iterations.csv", "convergence.csv", "binned.csv", "ablation.csv"];

/// Writes the CSV tables, `manifest.json` and `timings.json` to `dir`.
/// Only `timings.json` depends on the machine.
pub fn write_study(result: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir)?;
    let path = |name: &str| dir.join(name);
    let mut trials = csv::Writer::from_path(path("trials.csv"))?;
    let mut iterations = csv::Writer::from_path(path("iterations.csv"))?;
    let mut convergence = csv::Writer::from_path(path("convergence.csv"))?;
    let mut binned = csv::Writer::from_path(path("binned.csv"))?;
    let mut ablation = csv::Writer::from_path(path("ablation.csv"))?;
    let bins = result.config.angle_bins;
    let mut timings = Vec::new();

    for a in &result.arms {
        let label = a.label();
        let model = a.model.name();
        for t in &a.trials {
            trials.serialize(TrialRow {
                model,
                arm: &label,
                surface: a.arm.surface.name(),
                optimizer: a.arm.optimizer.name(),
                lambda_n: a.arm.lambda_n,
                trial: t.trial,
                seed: t.seed,
                gt_angle_deg: t.gt_angle_deg,
                initial_error_deg: t.errors[0],
                final_error_deg: t.final_error(),
                iterations: t.iterations,
                converged: t.converged,
                final_energy: *t.energies.last().expect("non-empty"),
                monotone: t.monotone,
                truncated_walks: t.truncated_walks,
            })?;
            for (k, (e, en)) in t.errors.iter().zip(&t.energies).enumerate() {
                iterations.serialize(IterationRow {
                    model,
                    arm: &label,
                    trial: t.trial,
                    iteration: k,
                    error_deg: *e,
                    energy: *en,
                })?;
            }
        }
        for k in 0..=result.config.iterations {
            convergence.serialize(summary_row(a, &label, k))?;
        }
        for k in result.config.sorted_checkpoints() {
            ablation.serialize(summary_row(a, &label, k))?;
        }
        for (b, s) in a.binned(bins).iter().enumerate() {
            let width = 360.0 / bins as f64;
            binned.serialize(BinRow {
                model,
                arm: &label,
                surface: a.arm.surface.name(),
                optimizer: a.arm.optimizer.name(),
                lambda_n: a.arm.lambda_n,
                bin: b,
                bin_lo_deg: -180.0 + width * b as f64,
                bin_hi_deg: -180.0 + width * (b + 1) as f64,
                count: s.count,
                mean_error_deg: s.mean,
                stdev: s.stdev,
                stderr: s.stderr,
            })?;
        }
        let per_iteration = a.mean_iteration_seconds();
        let cumulative: Vec<f64> = per_iteration
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        timings.push(serde_json::json!({
            "model": model,
            "arm": label,
            "mean_iteration_seconds": per_iteration,
            "mean_cumulative_seconds": cumulative,
            "mean_errors_deg": a.mean_errors(),
        }));
    }
    trials.flush()?;
    iterations.flush()?;
    convergence.flush()?;
    binned.flush()?;
    ablation.flush()?;

    let manifest = serde_json::json!({
        "name": result.config.name,
        "version": version_string(),
        "config": result.config,
        "files": STUDY_FILES,
    });
    std::fs::write(path("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let timing = serde_json::json!({
        "host": host_info(),
        "wall_seconds": result.wall_seconds,
        "arms": timings,
    });
    std::fs::write(path("timings.json"), serde_json::to_string_pretty(&timing)? + "\n")?;

    let mut written: Vec<PathBuf> = STUDY_FILES.iter().map(|f| path(f)).collect();
    written.push(path("manifest.json"));
    written.push(path("timings.json"));
    Ok(written)
}
