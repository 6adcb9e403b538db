//! Normal-weight sweeps: the lifted fit repeated over a grid of `lambda_n`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::models::ModelId;
use super::study::{run_study, GridSpec, StudyConfig};
use super::{version_string, BenchError};
use crate::energy::Optimizer;
use crate::surfaces::SurfaceKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub trials: usize,
    pub model: ModelId,
    pub surfaces: Vec<SurfaceKind>,
    pub optimizer: Optimizer,
    pub lambda_n: Vec<f64>,
    pub iterations: usize,
    pub data_count: usize,
    pub noise: f64,
    pub visible_only: bool,
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 400,
            model: ModelId::Ellipsoid320,
            surfaces: vec![SurfaceKind::Phong, SurfaceKind::TriMesh],
            optimizer: Optimizer::Lifted,
            lambda_n: default_lambda_grid(),
            iterations: 50,
            data_count: 200,
            noise: 0.1,
            visible_only: true,
            jobs: 0,
        }
    }
}

/// `0, 0.05, ..., 1.0`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub model: String,
    pub surface: SurfaceKind,
    pub lambda_n: f64,
    pub count: usize,
    pub mean_error_deg: f64,
    pub stdev: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// The weight with the lowest final mean error for `surface`; the
    /// smaller weight wins ties.
    pub fn best(&self, surface: SurfaceKind) -> Option<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.surface == surface)
            .min_by(|a, b| a.mean_error_deg.total_cmp(&b.mean_error_deg).then(a.lambda_n.total_cmp(&b.lambda_n)))
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult, BenchError> {
    if config.lambda_n.is_empty() || config.surfaces.is_empty() {
        return Err(BenchError::Config("lambda_n and surfaces must be non-empty".into()));
    }
    let mut study = StudyConfig::new(config.seed, config.trials, Vec::new());
    study.name = "sweep".into();
    study.models = vec![config.model];
    study.grid = Some(GridSpec {
        surfaces: config.surfaces.clone(),
        optimizers: vec![config.optimizer],
        lambda_n: config.lambda_n.clone(),
    });
    study.iterations = config.iterations;
    study.checkpoints.clear();
    study.data_count = config.data_count;
    study.noise = config.noise;
    study.visible_only = config.visible_only;
    study.jobs = config.jobs;
    let result = run_study(&study)?;
    let points = result
        .arms
        .iter()
        .map(|a| {
            let s = a.summary_at(config.iterations);
            SweepPoint {
                model: a.model.name().into(),
                surface: a.arm.surface,
                lambda_n: a.arm.lambda_n,
                count: s.count,
                mean_error_deg: s.mean,
                stdev: s.stdev,
                stderr: s.stderr,
            }
        })
        .collect();
    Ok(SweepResult {
        config: config.clone(),
        points,
    })
}

/// Writes `sweep.csv`, `sweep_best.csv` and `manifest.json`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir)?;
    let sweep = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&sweep)?;
    for p in &result.points {
        w.serialize(p)?;
    }
    w.flush()?;
    let best = dir.join("sweep_best.csv");
    let mut w = csv::Writer::from_path(&best)?;
    for s in &result.config.surfaces {
        if let Some(p) = result.best(*s) {
            w.serialize(p)?;
        }
    }
    w.flush()?;
    let manifest = dir.join("manifest.json");
    let doc = serde_json::json!({
        "name": "sweep",
        "version": version_string(),
        "config": result.config,
        "files": ["sweep.csv", "sweep_best.csv"],
    });
    std::fs::write(&manifest, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(vec![sweep, best, manifest])
}
