//! Benchmark harness: synthetic models and data, the ellipsoid and chain
//! studies, lambda sweeps and evaluation timing.

mod chain;
mod metrics;
mod models;
mod probe;
mod sampling;
mod study;
mod sweep;

pub use chain::{run_chain_study, write_chain_study, ChainStudyConfig, ChainStudyResult, ChainTrial};
pub use metrics::{angle_bin, iterations_to_reach, rotation_error, Summary};
pub use models::{
    chain_mesh, ellipsoid_control, ellipsoid_reference, make_chain3, make_ellipsoid, BenchModel, ModelId, CHAIN_LENGTH, CHAIN_RADIUS,
    ELLIPSOID_RADII,
};
pub use probe::{flop_estimate, timing_probe, ProbeResult};
pub use sampling::{sample_observations, sampling_weights, uniform_barycentric, Sample, SamplingSpec};
pub use study::{
    parse_study_config, run_study, write_study, ArmResult, ArmSpec, GridSpec, SamplingSurface, StudyConfig, StudyResult, TrialRecord,
    STUDY_FILES,
};
pub use sweep::{default_lambda_grid, run_sweep, write_sweep, SweepConfig, SweepPoint, SweepResult};

use thiserror::Error;

use crate::energy::EnergyError;
use crate::kinematics::KinematicsError;
use crate::mesh::MeshError;
use crate::solvers::FitError;
use crate::surfaces::{LimitMeshError, SurfaceError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(String),
    #[error("no patch faces the +z direction; nothing to sample")]
    NoVisiblePatches,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Limit(#[from] LimitMeshError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Per-trial seed derived from the study seed.
pub fn trial_seed(study_seed: u64, trial: usize) -> u64 {
    study_seed ^ trial as u64
}

/// Version string written to manifests.
pub fn version_string() -> String {
    format!("phong-fit {}", env!("CARGO_PKG_VERSION"))
}

/// Host description for manifests.
pub fn host_info() -> serde_json::Value {
    serde_json::json!({
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "threads": std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, BenchError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}
