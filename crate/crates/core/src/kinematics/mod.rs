//! Pose parameterizations producing posed control vertices, normals and
//! their derivatives with respect to the parameter vector.

mod lbs;
mod rigid;

pub use lbs::{
    normal_divergence, recompute_normals, Affine, Joint, NormalDivergence, NormalMode, SkinnedModel,
    SkinnedModelDocument,
};
pub use rigid::{pose_rigid, pose_rigid_values, RigidModel, RigidPose};

use nalgebra::{DVector, Matrix3xX, Vector3};
use thiserror::Error;

use crate::mesh::{ControlMesh, MeshError};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("parameter vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vertex {vertex} skinning weights sum to {sum}, expected 1")]
    WeightSum { vertex: usize, sum: f64 },
    #[error("vertex {vertex} has a negative weight {weight} for joint {joint}")]
    NegativeWeight { vertex: usize, joint: usize, weight: f64 },
    #[error("weight references joint {joint} but the model has {count} joints")]
    JointOutOfRange { joint: usize, count: usize },
    #[error("weight references vertex {vertex} but the mesh has {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("joint hierarchy contains a cycle through joint `{0}`")]
    Cycle(String),
    #[error("joint `{0}` has a non-invertible rest transform")]
    SingularRest(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("parameter layout does not match the joint hierarchy: {0}")]
    Layout(String),
    #[error("blended normal of vertex {0} vanished")]
    DegenerateNormal(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Derivatives of posed vertex data: one `3 x P` block per vertex.
#[derive(Debug, Clone)]
pub struct PoseJacobians {
    pub positions: Vec<Matrix3xX<f64>>,
    pub normals: Vec<Matrix3xX<f64>>,
}

/// Control vertices and normals at a pose, sharing the rest topology.
#[derive(Debug, Clone)]
pub struct PosedMesh<'a> {
    pub mesh: &'a ControlMesh,
    pub positions: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub jacobians: Option<PoseJacobians>,
    pub parameter_count: usize,
}

impl<'a> PosedMesh<'a> {
    /// The rest mesh with zero-width Jacobians.
    pub fn rest(mesh: &'a ControlMesh) -> Self {
        Self {
            mesh,
            positions: mesh.positions().to_vec(),
            normals: mesh.normals().to_vec(),
            jacobians: None,
            parameter_count: 0,
        }
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        self.mesh.triangles()
    }

    /// Corner positions of a patch.
    #[inline]
    pub fn corners(&self, patch: usize) -> [Vector3<f64>; 3] {
        self.mesh.triangles()[patch].map(|i| self.positions[i])
    }

    #[inline]
    pub fn corner_normals(&self, patch: usize) -> [Vector3<f64>; 3] {
        self.mesh.triangles()[patch].map(|i| self.normals[i])
    }

    /// Unnormalized posed face normal.
    pub fn face_normal(&self, patch: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(patch);
        (b - a).cross(&(c - a))
    }
}

/// Anything that can pose a control mesh from a parameter vector.
pub trait PoseModel: Sync {
    fn mesh(&self) -> &ControlMesh;

    fn parameter_count(&self) -> usize;

    /// Posed vertex data; Jacobians are filled when `with_jacobians` is set.
    fn pose(&self, theta: &DVector<f64>, with_jacobians: bool) -> Result<PosedMesh<'_>, KinematicsError>;

    fn check_dimension(&self, theta: &DVector<f64>) -> Result<(), KinematicsError> {
        if theta.len() != self.parameter_count() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.parameter_count(),
                found: theta.len(),
            });
        }
        Ok(())
    }
}
