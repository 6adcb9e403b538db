use nalgebra::{DVector, Matrix3, Matrix3xX, Vector3, Vector6};

use super::{KinematicsError, PoseJacobians, PoseModel, PosedMesh};
use crate::mesh::ControlMesh;
use crate::rotation::RotationWithJacobian;

/// Rigid pose `[t_x, t_y, t_z, r_x, r_y, r_z]`, rotation as axis-angle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidPose(pub Vector6<f64>);

impl RigidPose {
    pub fn identity() -> Self {
        Self(Vector6::zeros())
    }

    pub fn new(translation: Vector3<f64>, rotation: Vector3<f64>) -> Self {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&translation);
        v.fixed_rows_mut::<3>(3).copy_from(&rotation);
        Self(v)
    }

    pub fn from_slice(theta: &[f64]) -> Self {
        Self(Vector6::from_column_slice(&theta[..6]))
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into()
    }

    pub fn axis_angle(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        crate::rotation::rotation_matrix(&self.axis_angle())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.0.as_slice())
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }
}

/// Rigidly posed vertices `R v + t` and normals `R n`.
pub fn pose_rigid<'a>(mesh: &'a ControlMesh, pose: &RigidPose) -> PosedMesh<'a> {
    pose_rigid_impl(mesh, pose, true)
}

/// As [`pose_rigid`] without Jacobians.
pub fn pose_rigid_values<'a>(mesh: &'a ControlMesh, pose: &RigidPose) -> PosedMesh<'a> {
    pose_rigid_impl(mesh, pose, false)
}

fn pose_rigid_impl<'a>(mesh: &'a ControlMesh, pose: &RigidPose, with_jacobians: bool) -> PosedMesh<'a> {
    let rot = RotationWithJacobian::new(&pose.axis_angle());
    let t = pose.translation();
    let positions: Vec<_> = mesh.positions().iter().map(|v| rot.rotation * v + t).collect();
    let normals: Vec<_> = mesh.normals().iter().map(|n| rot.rotation * n).collect();
    let jacobians = with_jacobians.then(|| {
        let position_blocks = mesh
            .positions()
            .iter()
            .map(|v| {
                let mut j = Matrix3xX::zeros(6);
                j.fixed_columns_mut::<3>(0).fill_with_identity();
                j.fixed_columns_mut::<3>(3).copy_from(&rot.d_rotate(v));
                j
            })
            .collect();
        let normal_blocks = mesh
            .normals()
            .iter()
            .map(|n| {
                let mut j = Matrix3xX::zeros(6);
                j.fixed_columns_mut::<3>(3).copy_from(&rot.d_rotate(n));
                j
            })
            .collect();
        PoseJacobians {
            positions: position_blocks,
            normals: normal_blocks,
        }
    });
    PosedMesh {
        mesh,
        positions,
        normals,
        jacobians,
        parameter_count: 6,
    }
}

/// A control mesh moved by a single rigid transform.
#[derive(Debug, Clone)]
pub struct RigidModel {
    pub mesh: ControlMesh,
}

impl RigidModel {
    pub fn new(mesh: ControlMesh) -> Self {
        Self { mesh }
    }
}

impl PoseModel for RigidModel {
    fn mesh(&self) -> &ControlMesh {
        &self.mesh
    }

    fn parameter_count(&self) -> usize {
        6
    }

    fn pose(&self, theta: &DVector<f64>, with_jacobians: bool) -> Result<PosedMesh<'_>, KinematicsError> {
        self.check_dimension(theta)?;
        Ok(pose_rigid_impl(&self.mesh, &RigidPose::from_slice(theta.as_slice()), with_jacobians))
    }
}
