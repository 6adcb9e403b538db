//! Lifted Levenberg and alternating ICP fitting.

mod closest;
mod schur;

pub use closest::{closest_on_triangle, closest_point, closest_points, ClosestPointQuery};
pub use schur::{solve_dense, solve_lifted, solve_theta_only, FlopCount, LiftedSolution};

use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::energy::{assemble, energy_only, validate_observations, EnergyError, FitConfig, Observation, Optimizer};
use crate::kinematics::{KinematicsError, PoseModel};
use crate::mesh::{walk, SurfaceCoordinate, DEFAULT_CROSSING_CAP};

/// Damping never drops below this.
pub const MIN_DAMPING: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Current hypothesis of an optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub theta: DVector<f64>,
    pub u: Vec<SurfaceCoordinate>,
    pub damping: f64,
    pub energy: f64,
}

/// What happened during one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// Energy the Levenberg step started from. For ICP this is after the
    /// closest-point update.
    pub energy_before: f64,
    pub energy_after: f64,
    pub accepted: bool,
    pub rejects: usize,
    /// Damping used by the accepted step, or the last one tried.
    pub damping: f64,
    pub crossings: usize,
    pub truncated_walks: usize,
    pub flops: FlopCount,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    #[serde(serialize_with = "serialize_dvector")]
    pub theta: DVector<f64>,
    #[serde(skip)]
    pub u: Vec<SurfaceCoordinate>,
    pub iterations: usize,
    pub converged: bool,
    /// Energy before the first iteration and after each one.
    pub energy_trace: Vec<f64>,
    /// Parameters before the first iteration and after each one.
    #[serde(skip)]
    pub theta_trace: Vec<DVector<f64>>,
    pub steps: Vec<StepRecord>,
    pub wall_seconds: f64,
    pub iteration_seconds: Vec<f64>,
}

fn serialize_dvector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

impl FitReport {
    /// Every accepted step kept or lowered the energy it started from.
    pub fn is_monotone(&self) -> bool {
        self.steps.iter().all(|s| !s.accepted || s.energy_after <= s.energy_before)
    }
}

fn evaluate_candidate(
    model: &dyn PoseModel,
    config: &FitConfig,
    theta: &DVector<f64>,
    u: &[SurfaceCoordinate],
    data: &[Observation],
) -> Result<f64, KinematicsError> {
    let posed = model.pose(theta, false)?;
    // A candidate that makes the surface degenerate is treated as a failed step.
    Ok(energy_only(&posed, config.surface, u, data, config.lambda_n).unwrap_or(f64::INFINITY))
}

/// One lifted Levenberg iteration over `(theta, U)`.
pub fn lifted_step(
    model: &dyn PoseModel,
    data: &[Observation],
    config: &FitConfig,
    state: &mut FitState,
) -> Result<StepRecord, FitError> {
    let posed = model.pose(&state.theta, true)?;
    let system = assemble(&posed, config.surface, &state.u, data, config.lambda_n)?;
    let energy_before = system.energy;
    let mut record = StepRecord {
        energy_before,
        energy_after: energy_before,
        accepted: false,
        rejects: 0,
        damping: state.damping,
        crossings: 0,
        truncated_walks: 0,
        flops: FlopCount::default(),
    };
    loop {
        record.damping = state.damping;
        if let Some(sol) = solve_lifted(&system, state.damping) {
            record.flops = sol.flops;
            let theta = &state.theta + &sol.delta_theta;
            let mut crossings = 0;
            let mut truncated = 0;
            let u: Vec<_> = state
                .u
                .iter()
                .zip(&sol.delta_u)
                .map(|(ui, du)| {
                    let out = walk(model.mesh(), ui, *du, DEFAULT_CROSSING_CAP);
                    crossings += out.crossings;
                    truncated += out.truncated() as usize;
                    out.coordinate
                })
                .collect();
            let energy = evaluate_candidate(model, config, &theta, &u, data)?;
            if energy <= energy_before {
                state.theta = theta;
                state.u = u;
                state.energy = energy;
                state.damping = (state.damping / config.damping.decrease).max(MIN_DAMPING);
                record.energy_after = energy;
                record.accepted = true;
                record.crossings = crossings;
                record.truncated_walks = truncated;
                return Ok(record);
            }
        }
        state.damping *= config.damping.increase;
        record.rejects += 1;
        if record.rejects >= config.damping.max_rejects {
            return Ok(record);
        }
    }
}

/// Replaces every correspondence by the closest surface point.
pub fn update_correspondences(
    model: &dyn PoseModel,
    theta: &DVector<f64>,
    data: &[Observation],
) -> Result<Vec<SurfaceCoordinate>, KinematicsError> {
    let posed = model.pose(theta, false)?;
    Ok(closest_points(&posed, data.iter().map(|d| &d.point)))
}

/// One ICP iteration: closest points, then a Levenberg step in `theta` alone.
pub fn icp_step(
    model: &dyn PoseModel,
    data: &[Observation],
    config: &FitConfig,
    state: &mut FitState,
) -> Result<StepRecord, FitError> {
    state.u = update_correspondences(model, &state.theta, data)?;
    let posed = model.pose(&state.theta, true)?;
    let system = assemble(&posed, config.surface, &state.u, data, config.lambda_n)?;
    state.energy = system.energy;
    let energy_before = system.energy;
    let mut record = StepRecord {
        energy_before,
        energy_after: energy_before,
        accepted: false,
        rejects: 0,
        damping: state.damping,
        crossings: 0,
        truncated_walks: 0,
        flops: FlopCount::default(),
    };
    loop {
        record.damping = state.damping;
        if let Some((delta, flops)) = solve_theta_only(&system, state.damping) {
            record.flops = flops;
            let theta = &state.theta + delta;
            let energy = evaluate_candidate(model, config, &theta, &state.u, data)?;
            if energy <= energy_before {
                state.theta = theta;
                state.energy = energy;
                state.damping = (state.damping / config.damping.decrease).max(MIN_DAMPING);
                record.energy_after = energy;
                record.accepted = true;
                return Ok(record);
            }
        }
        state.damping *= config.damping.increase;
        record.rejects += 1;
        if record.rejects >= config.damping.max_rejects {
            return Ok(record);
        }
    }
}

/// Fits `model` to `data` from `theta0`. Correspondences start at the
/// closest points of the initial pose.
pub fn run_fit(
    model: &dyn PoseModel,
    data: &[Observation],
    theta0: &DVector<f64>,
    config: &FitConfig,
) -> Result<FitReport, FitError> {
    config.validate().map_err(FitError::Config)?;
    validate_observations(data)?;
    model.check_dimension(theta0)?;
    let start = Instant::now();

    let u = update_correspondences(model, theta0, data)?;
    let posed = model.pose(theta0, false)?;
    let energy = energy_only(&posed, config.surface, &u, data, config.lambda_n)?;
    let mut state = FitState {
        theta: theta0.clone(),
        u,
        damping: config.damping.initial,
        energy,
    };

    let mut energy_trace = vec![energy];
    let mut theta_trace = vec![theta0.clone()];
    let mut steps = Vec::new();
    let mut iteration_seconds = Vec::new();
    let mut converged = false;

    for k in 1..=config.max_iterations {
        let t0 = Instant::now();
        let record = match config.optimizer {
            Optimizer::Lifted => lifted_step(model, data, config, &mut state)?,
            Optimizer::Icp => icp_step(model, data, config, &mut state)?,
        };
        iteration_seconds.push(t0.elapsed().as_secs_f64());
        steps.push(record);
        energy_trace.push(state.energy);
        theta_trace.push(state.theta.clone());

        if state.energy <= config.energy_floor {
            converged = true;
            break;
        }
        let w = config.convergence_window;
        if k >= w {
            let old = energy_trace[k - w];
            if old - state.energy <= config.convergence_tolerance * old {
                converged = true;
                break;
            }
        }
    }

    Ok(FitReport {
        theta: state.theta,
        u: state.u,
        iterations: steps.len(),
        converged,
        energy_trace,
        theta_trace,
        steps,
        wall_seconds: start.elapsed().as_secs_f64(),
        iteration_seconds,
    })
}
