//! The lifted data term over pose parameters and correspondences.
//!
//! For `D` observations the energy is
//!
//! ```text
//! E(theta, U) = 1/D * sum_i |S(u_i) - x_i|^2 + lambda_n |N(u_i) - n_i|^2
//! ```
//!
//! Each datum contributes six residual rows, position then normal, with the
//! `1/D` average folded into the rows so that `E` is the plain squared norm.

use nalgebra::{DMatrix, DVector, Matrix6x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::PosedMesh;
use crate::mesh::SurfaceCoordinate;
use crate::surfaces::{self, SurfaceError, SurfaceKind};

/// Tolerance on observation normal length.
pub const OBSERVATION_NORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("observation {index} normal has length {length}, expected unit length")]
    NonUnitNormal { index: usize, length: f64 },
    #[error("observation {index} has non-finite entries")]
    NonFinite { index: usize },
    #[error("{data} observations but {correspondences} correspondences")]
    CountMismatch { data: usize, correspondences: usize },
    #[error("no observations")]
    Empty,
    #[error("lambda_n must be finite and nonnegative, got {0}")]
    NegativeWeight(f64),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// A data point with its estimated unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl Observation {
    pub fn new(point: Vector3<f64>, normal: Vector3<f64>) -> Result<Self, EnergyError> {
        let obs = Self { point, normal };
        obs.validate(0)?;
        Ok(obs)
    }

    fn validate(&self, index: usize) -> Result<(), EnergyError> {
        if !self.point.iter().chain(self.normal.iter()).all(|x| x.is_finite()) {
            return Err(EnergyError::NonFinite { index });
        }
        let length = self.normal.norm();
        if (length - 1.0).abs() > OBSERVATION_NORMAL_TOLERANCE {
            return Err(EnergyError::NonUnitNormal { index, length });
        }
        Ok(())
    }
}

/// Checks every observation, reporting the first bad index.
pub fn validate_observations(data: &[Observation]) -> Result<(), EnergyError> {
    if data.is_empty() {
        return Err(EnergyError::Empty);
    }
    data.iter().enumerate().try_for_each(|(i, d)| d.validate(i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Lifted,
    Icp,
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Lifted => "lifted",
            Optimizer::Icp => "icp",
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lifted" => Ok(Optimizer::Lifted),
            "icp" => Ok(Optimizer::Icp),
            other => Err(format!("unknown optimizer `{other}` (expected lifted or icp)")),
        }
    }
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Levenberg damping schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Damping {
    pub initial: f64,
    /// Factor applied after a rejected step.
    pub increase: f64,
    /// Divisor applied after an accepted step.
    pub decrease: f64,
    pub max_rejects: usize,
}

impl Default for Damping {
    fn default() -> Self {
        Self {
            initial: 1e-3,
            increase: 10.0,
            decrease: 10.0,
            max_rejects: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub lambda_n: f64,
    pub surface: SurfaceKind,
    pub optimizer: Optimizer,
    pub max_iterations: usize,
    #[serde(default)]
    pub damping: Damping,
    /// Relative energy decrease over `convergence_window` iterations below
    /// which the fit stops.
    #[serde(default = "default_tolerance")]
    pub convergence_tolerance: f64,
    #[serde(default = "default_window")]
    pub convergence_window: usize,
    /// Energies at or below this count as an exact fit.
    #[serde(default = "default_floor")]
    pub energy_floor: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_window() -> usize {
    3
}

fn default_floor() -> f64 {
    1e-20
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda_n: 1.0,
            surface: SurfaceKind::Phong,
            optimizer: Optimizer::Lifted,
            max_iterations: 50,
            damping: Damping::default(),
            convergence_tolerance: default_tolerance(),
            convergence_window: default_window(),
            energy_floor: default_floor(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda_n.is_finite() && self.lambda_n >= 0.0) {
            return Err(format!("lambda_n must be finite and nonnegative, got {}", self.lambda_n));
        }
        let d = &self.damping;
        if !(d.initial > 0.0 && d.initial.is_finite()) {
            return Err(format!("initial damping must be positive, got {}", d.initial));
        }
        if !(d.increase > 1.0 && d.decrease > 1.0) {
            return Err("damping factors must exceed 1".into());
        }
        if d.max_rejects == 0 {
            return Err("max_rejects must be at least 1".into());
        }
        if self.convergence_window == 0 {
            return Err("convergence_window must be at least 1".into());
        }
        Ok(())
    }
}

/// Residuals and Jacobians of the lifted energy at one state.
#[derive(Debug, Clone)]
pub struct ResidualSystem {
    /// `6D` rows: three position then three normal rows per datum.
    pub residuals: DVector<f64>,
    /// `6D x P`.
    pub j_theta: DMatrix<f64>,
    /// One `6 x 2` block per datum, columns `d/dv` and `d/dw`.
    pub j_u: Vec<Matrix6x2<f64>>,
    pub energy: f64,
}

impl ResidualSystem {
    pub fn data_count(&self) -> usize {
        self.j_u.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.j_theta.ncols()
    }

    /// Half the gradient of `E` in `theta`: `J_theta^T r`.
    pub fn gradient_theta(&self) -> DVector<f64> {
        self.j_theta.tr_mul(&self.residuals)
    }

    /// Half the gradient of `E` in `u_i`: `J_u_i^T r_i`.
    pub fn gradient_u(&self, i: usize) -> Vector2<f64> {
        self.j_u[i].tr_mul(&self.residuals.fixed_rows::<6>(6 * i))
    }
}

fn check_inputs(u: &[SurfaceCoordinate], data: &[Observation], lambda_n: f64) -> Result<(), EnergyError> {
    if data.is_empty() {
        return Err(EnergyError::Empty);
    }
    if u.len() != data.len() {
        return Err(EnergyError::CountMismatch {
            data: data.len(),
            correspondences: u.len(),
        });
    }
    if !(lambda_n.is_finite() && lambda_n >= 0.0) {
        return Err(EnergyError::NegativeWeight(lambda_n));
    }
    Ok(())
}

/// Builds residuals and both Jacobians. `posed` must carry pose Jacobians
/// for `J_theta` to be nonzero.
pub fn assemble(
    posed: &PosedMesh<'_>,
    kind: SurfaceKind,
    u: &[SurfaceCoordinate],
    data: &[Observation],
    lambda_n: f64,
) -> Result<ResidualSystem, EnergyError> {
    check_inputs(u, data, lambda_n)?;
    let d = data.len();
    let p = posed.parameter_count;
    let ws = (1.0 / d as f64).sqrt();
    let wn = (lambda_n / d as f64).sqrt();

    let mut residuals = DVector::zeros(6 * d);
    let mut j_theta = DMatrix::zeros(6 * d, p);
    let mut j_u = Vec::with_capacity(d);
    for (i, (ui, obs)) in u.iter().zip(data).enumerate() {
        let e = surfaces::evaluate(posed, kind, ui)?;
        let row = 6 * i;
        residuals.fixed_rows_mut::<3>(row).copy_from(&((e.position - obs.point) * ws));
        residuals.fixed_rows_mut::<3>(row + 3).copy_from(&((e.normal - obs.normal) * wn));
        if p > 0 {
            j_theta.view_mut((row, 0), (3, p)).copy_from(&(e.ds_dtheta * ws));
            j_theta.view_mut((row + 3, 0), (3, p)).copy_from(&(e.dn_dtheta * wn));
        }
        let mut block = Matrix6x2::zeros();
        block.fixed_view_mut::<3, 1>(0, 0).copy_from(&(e.ds_dv * ws));
        block.fixed_view_mut::<3, 1>(0, 1).copy_from(&(e.ds_dw * ws));
        block.fixed_view_mut::<3, 1>(3, 0).copy_from(&(e.dn_dv * wn));
        block.fixed_view_mut::<3, 1>(3, 1).copy_from(&(e.dn_dw * wn));
        j_u.push(block);
    }
    let energy = residuals.norm_squared();
    Ok(ResidualSystem {
        residuals,
        j_theta,
        j_u,
        energy,
    })
}

/// Energy without derivatives.
pub fn energy_only(
    posed: &PosedMesh<'_>,
    kind: SurfaceKind,
    u: &[SurfaceCoordinate],
    data: &[Observation],
    lambda_n: f64,
) -> Result<f64, EnergyError> {
    check_inputs(u, data, lambda_n)?;
    let mut sum = 0.0;
    for (ui, obs) in u.iter().zip(data) {
        let e = surfaces::eval_point(posed, kind, ui)?;
        let rs = e.position - obs.point;
        let rn = e.normal - obs.normal;
        sum += rs.norm_squared() + lambda_n * rn.norm_squared();
    }
    Ok(sum / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{pose_rigid, pose_rigid_values, RigidPose};
    use crate::mesh::fixtures::octahedron;
    use crate::surfaces::eval_point;

    fn on_surface(posed: &PosedMesh<'_>, kind: SurfaceKind, u: &[SurfaceCoordinate]) -> Vec<Observation> {
        u.iter()
            .map(|ui| {
                let e = eval_point(posed, kind, ui).unwrap();
                Observation::new(e.position, e.normal).unwrap()
            })
            .collect()
    }

    fn coords() -> Vec<SurfaceCoordinate> {
        vec![
            SurfaceCoordinate::new(0, 0.2, 0.3).unwrap(),
            SurfaceCoordinate::new(3, 0.6, 0.1).unwrap(),
            SurfaceCoordinate::new(7, 0.25, 0.25).unwrap(),
        ]
    }

    #[test]
    fn exact_data_has_zero_energy() {
        let mesh = octahedron();
        let posed = pose_rigid(&mesh, &RigidPose::new(Vector3::new(0.1, 0.0, 0.2), Vector3::new(0.3, -0.1, 0.2)));
        let u = coords();
        for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
            let data = on_surface(&posed, kind, &u);
            let sys = assemble(&posed, kind, &u, &data, 0.7).unwrap();
            assert_eq!(sys.energy, 0.0);
            assert!(sys.residuals.iter().all(|&r| r == 0.0));
            assert_eq!(energy_only(&posed, kind, &u, &data, 0.7).unwrap(), 0.0);
        }
    }

    #[test]
    fn offset_along_normal_costs_d_squared() {
        let mesh = octahedron();
        let posed = pose_rigid(&mesh, &RigidPose::identity());
        let u = vec![SurfaceCoordinate::new(2, 0.3, 0.3).unwrap()];
        let e = eval_point(&posed, SurfaceKind::Phong, &u[0]).unwrap();
        let data = vec![Observation::new(e.position + e.normal * 0.25, e.normal).unwrap()];
        for lambda in [0.0, 1.0, 5.0] {
            let sys = assemble(&posed, SurfaceKind::Phong, &u, &data, lambda).unwrap();
            assert!((sys.energy - 0.0625).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_normal_weight_zeros_normal_rows() {
        let mesh = octahedron();
        let posed = pose_rigid(&mesh, &RigidPose::new(Vector3::zeros(), Vector3::new(0.2, 0.4, 0.1)));
        let u = coords();
        let data: Vec<_> = [Vector3::x(), Vector3::y(), Vector3::z()]
            .iter()
            .zip(&u)
            .map(|(n, ui)| Observation::new(mesh.point_at(ui), *n).unwrap())
            .collect();
        let flipped: Vec<_> = data.iter().map(|o| Observation::new(o.point, -o.normal).unwrap()).collect();
        for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
            let sys = assemble(&posed, kind, &u, &data, 0.0).unwrap();
            for i in 0..u.len() {
                assert!(sys.residuals.fixed_rows::<3>(6 * i + 3).iter().all(|&x| x == 0.0));
                assert!(sys.j_theta.view((6 * i + 3, 0), (3, 6)).iter().all(|&x| x == 0.0));
                assert!(sys.j_u[i].fixed_rows::<3>(3).iter().all(|&x| x == 0.0));
            }
            let a = energy_only(&posed, kind, &u, &data, 0.0).unwrap();
            let b = energy_only(&posed, kind, &u, &flipped, 0.0).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trimesh_correspondence_jacobian_has_no_normal_part() {
        let mesh = octahedron();
        let posed = pose_rigid(&mesh, &RigidPose::new(Vector3::zeros(), Vector3::new(0.5, 0.0, 0.3)));
        let u = coords();
        let data = on_surface(&posed, SurfaceKind::Phong, &u);
        let sys = assemble(&posed, SurfaceKind::TriMesh, &u, &data, 2.0).unwrap();
        for block in &sys.j_u {
            assert!(block.fixed_rows::<3>(3).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn energy_only_matches_assembled_energy() {
        let mesh = octahedron();
        let pose = RigidPose::new(Vector3::new(0.3, 0.1, -0.2), Vector3::new(-0.4, 0.2, 0.9));
        let posed = pose_rigid(&mesh, &pose);
        let values = pose_rigid_values(&mesh, &pose);
        let u = coords();
        let data: Vec<_> = u
            .iter()
            .enumerate()
            .map(|(i, ui)| {
                let n = Vector3::new(1.0, i as f64, -2.0).normalize();
                Observation::new(mesh.point_at(ui) * 1.1, n).unwrap()
            })
            .collect();
        for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
            let a = assemble(&posed, kind, &u, &data, 0.4).unwrap().energy;
            let b = energy_only(&values, kind, &u, &data, 0.4).unwrap();
            assert!((a - b).abs() <= 1e-14 * a.max(1.0));
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(
            Observation::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.1)),
            Err(EnergyError::NonUnitNormal { .. })
        ));
        let mesh = octahedron();
        let posed = pose_rigid(&mesh, &RigidPose::identity());
        let u = coords();
        let data = on_surface(&posed, SurfaceKind::Phong, &u);
        assert!(matches!(
            energy_only(&posed, SurfaceKind::Phong, &u[..2], &data, 1.0),
            Err(EnergyError::CountMismatch { .. })
        ));
        assert!(matches!(
            energy_only(&posed, SurfaceKind::Phong, &u, &data, -1.0),
            Err(EnergyError::NegativeWeight(_))
        ));
    }
}
