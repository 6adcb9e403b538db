//! Articulated sanity study on the skinned three-segment chain.
//!
//! Each trial draws a target pose, samples noiseless data from it and fits
//! from a perturbed copy of the target.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::models::make_chain3;
use super::sampling::{sample_observations, SamplingSpec};
use super::{thread_pool, trial_seed, version_string, BenchError};
use crate::energy::{FitConfig, Optimizer};
use crate::kinematics::PoseModel;
use crate::solvers::run_fit;
use crate::surfaces::SurfaceKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainStudyConfig {
    pub seed: u64,
    pub trials: usize,
    pub iterations: usize,
    pub data_count: usize,
    pub noise: f64,
    pub surface: SurfaceKind,
    pub optimizer: Optimizer,
    pub lambda_n: f64,
    /// Half-widths of the uniform target distribution.
    pub target_translation: f64,
    pub target_rotation: f64,
    pub target_joint: f64,
    /// Half-widths of the uniform start perturbation around the target.
    pub start_translation: f64,
    pub start_rotation: f64,
    pub start_joint: f64,
    pub jobs: usize,
}

impl Default for ChainStudyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            iterations: 15,
            data_count: 200,
            noise: 0.0,
            surface: SurfaceKind::Phong,
            optimizer: Optimizer::Lifted,
            lambda_n: 1.0,
            target_translation: 0.2,
            target_rotation: 0.5,
            target_joint: 0.8,
            start_translation: 0.1,
            start_rotation: 0.15,
            start_joint: 0.3,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainTrial {
    pub trial: usize,
    pub seed: u64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// `initial_energy / final_energy`.
    pub reduction: f64,
    pub iterations: usize,
    pub converged: bool,
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct ChainStudyResult {
    pub config: ChainStudyConfig,
    pub trials: Vec<ChainTrial>,
}

impl ChainStudyResult {
    /// Share of trials whose energy dropped by at least `factor`.
    pub fn fraction_reduced(&self, factor: f64) -> f64 {
        let hits = self.trials.iter().filter(|t| t.reduction >= factor).count();
        hits as f64 / self.trials.len().max(1) as f64
    }
}

fn uniform_pose<R: Rng>(rng: &mut R, p: usize, translation: f64, rotation: f64, joint: f64) -> DVector<f64> {
    let mut sym = |h: f64| if h > 0.0 { rng.random_range(-h..h) } else { 0.0 };
    DVector::from_iterator(
        p,
        (0..p).map(|k| match k {
            0..=2 => sym(translation),
            3..=5 => sym(rotation),
            _ => sym(joint),
        }),
    )
}

pub fn run_chain_study(config: &ChainStudyConfig) -> Result<ChainStudyResult, BenchError> {
    if config.trials == 0 {
        return Err(BenchError::Config("trials: must be at least 1".into()));
    }
    let model = make_chain3()?;
    let p = model.parameter_count();
    let fit = FitConfig {
        lambda_n: config.lambda_n,
        surface: config.surface,
        optimizer: config.optimizer,
        max_iterations: config.iterations,
        ..FitConfig::default()
    };
    let spec = SamplingSpec {
        count: config.data_count,
        noise: config.noise,
        symmetric_noise: false,
        visible_only: false,
    };
    let pool = thread_pool(config.jobs)?;
    let trials = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(config.seed, trial);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let gt = uniform_pose(&mut rng, p, config.target_translation, config.target_rotation, config.target_joint);
                let start = &gt
                    + uniform_pose(&mut rng, p, config.start_translation, config.start_rotation, config.start_joint);
                let sample = sample_observations(&model, &gt, &spec, &mut rng)?;
                let report = run_fit(&model, &sample.observations, &start, &fit)?;
                let initial_energy = report.energy_trace[0];
                let final_energy = *report.energy_trace.last().expect("non-empty");
                Ok(ChainTrial {
                    trial,
                    seed,
                    initial_energy,
                    final_energy,
                    reduction: if final_energy > 0.0 { initial_energy / final_energy } else { f64::INFINITY },
                    iterations: report.iterations,
                    converged: report.converged,
                    monotone: report.is_monotone(),
                })
            })
            .collect::<Result<Vec<_>, BenchError>>()
    })?;
    Ok(ChainStudyResult {
        config: config.clone(),
        trials,
    })
}

/// Writes `chain_trials.csv` and `manifest.json`.
pub fn write_chain_study(result: &ChainStudyResult, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("chain_trials.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for t in &result.trials {
        w.serialize(t)?;
    }
    w.flush()?;
    let manifest = serde_json::json!({
        "name": "chain3",
        "version": version_string(),
        "config": result.config,
        "files": ["chain_trials.csv"],
    });
    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(vec![csv_path, manifest_path])
}
