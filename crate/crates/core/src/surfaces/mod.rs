//! Surface evaluation: position, unit normal, and their derivatives with
//! respect to the surface coordinate and the pose parameters.
//!
//! Both surface types share the planar triangle geometry. They differ only in
//! the normal field:
//!
//! * [`SurfaceKind::Phong`] normalizes the barycentric blend of the corner
//!   normals, giving a normal field that is continuous across edges and
//!   varies inside each patch.
//! * [`SurfaceKind::TriMesh`] uses the face normal, constant per patch.

mod loop_limit;

pub use loop_limit::{limit_mesh, loop_limit_stencil, loop_subdivide, one_ring, LimitMeshError, LoopLimit};

use nalgebra::{Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::PosedMesh;
use crate::mesh::SurfaceCoordinate;

/// Smallest admissible length of the interpolated normal direction.
pub const EPS_C: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("interpolated normal on patch {patch} has length {length} (below {EPS_C})")]
    DegenerateNormal { patch: usize, length: f64 },
    #[error("posed face {patch} has zero area")]
    DegenerateFace { patch: usize },
    #[error("vertex {0} lies on the mesh boundary; limit stencils need a closed 1-ring")]
    BoundaryVertex(usize),
    #[error("vertex {vertex} has valence {valence}; at least 3 is required")]
    LowValence { vertex: usize, valence: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Phong,
    #[serde(alias = "tri", alias = "tri-mesh")]
    TriMesh,
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Phong => "phong",
            SurfaceKind::TriMesh => "trimesh",
        }
    }
}

impl std::str::FromStr for SurfaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "phong" => Ok(SurfaceKind::Phong),
            "trimesh" | "tri" | "tri-mesh" => Ok(SurfaceKind::TriMesh),
            other => Err(format!("unknown surface type `{other}` (expected phong or trimesh)")),
        }
    }
}

impl std::fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Position and unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEvaluation {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Position, normal and their derivatives in `v` and `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateEvaluation {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub ds_dv: Vector3<f64>,
    pub ds_dw: Vector3<f64>,
    pub dn_dv: Vector3<f64>,
    pub dn_dw: Vector3<f64>,
}

/// Full evaluation including `3 x P` pose derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceEvaluation {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub ds_dv: Vector3<f64>,
    pub ds_dw: Vector3<f64>,
    pub dn_dv: Vector3<f64>,
    pub dn_dw: Vector3<f64>,
    pub ds_dtheta: Matrix3xX<f64>,
    pub dn_dtheta: Matrix3xX<f64>,
}

#[inline]
fn blend(b: &[f64; 3], x: &[Vector3<f64>; 3]) -> Vector3<f64> {
    x[0] * b[0] + x[1] * b[1] + x[2] * b[2]
}

/// `(I - n n^T) / len`: derivative of `c / |c|` with respect to `c`.
#[inline]
fn normalize_jacobian(n: &Vector3<f64>, len: f64) -> Matrix3<f64> {
    (Matrix3::identity() - n * n.transpose()) / len
}

#[inline]
fn phong_direction(posed: &PosedMesh<'_>, u: &SurfaceCoordinate) -> Result<(Vector3<f64>, f64), SurfaceError> {
    let c = blend(&u.barycentric(), &posed.corner_normals(u.patch));
    let len = c.norm();
    if !(len > EPS_C) {
        return Err(SurfaceError::DegenerateNormal {
            patch: u.patch,
            length: len,
        });
    }
    Ok((c, len))
}

#[inline]
fn face_direction(corners: &[Vector3<f64>; 3], patch: usize) -> Result<(Vector3<f64>, f64), SurfaceError> {
    let f = (corners[1] - corners[0]).cross(&(corners[2] - corners[0]));
    let len = f.norm();
    if !(len > 0.0) {
        return Err(SurfaceError::DegenerateFace { patch });
    }
    Ok((f, len))
}

/// Position and normal only.
#[inline]
pub fn eval_point(
    posed: &PosedMesh<'_>,
    kind: SurfaceKind,
    u: &SurfaceCoordinate,
) -> Result<PointEvaluation, SurfaceError> {
    let corners = posed.corners(u.patch);
    let position = blend(&u.barycentric(), &corners);
    let normal = match kind {
        SurfaceKind::Phong => {
            let (c, len) = phong_direction(posed, u)?;
            c / len
        }
        SurfaceKind::TriMesh => {
            let (f, len) = face_direction(&corners, u.patch)?;
            f / len
        }
    };
    Ok(PointEvaluation { position, normal })
}

/// Position, normal and `d/dv`, `d/dw` of both.
#[inline]
pub fn eval_with_coordinate_derivatives(
    posed: &PosedMesh<'_>,
    kind: SurfaceKind,
    u: &SurfaceCoordinate,
) -> Result<CoordinateEvaluation, SurfaceError> {
    let corners = posed.corners(u.patch);
    let position = blend(&u.barycentric(), &corners);
    let ds_dv = corners[1] - corners[0];
    let ds_dw = corners[2] - corners[0];
    let (normal, dn_dv, dn_dw) = match kind {
        SurfaceKind::Phong => {
            let (c, len) = phong_direction(posed, u)?;
            let n = c / len;
            let cn = posed.corner_normals(u.patch);
            // (I - n n^T) x / len without forming the matrix.
            let project = |x: Vector3<f64>| (x - n * n.dot(&x)) / len;
            (n, project(cn[1] - cn[0]), project(cn[2] - cn[0]))
        }
        SurfaceKind::TriMesh => {
            let f = ds_dv.cross(&ds_dw);
            let len = f.norm();
            if !(len > 0.0) {
                return Err(SurfaceError::DegenerateFace { patch: u.patch });
            }
            (f / len, Vector3::zeros(), Vector3::zeros())
        }
    };
    Ok(CoordinateEvaluation {
        position,
        normal,
        ds_dv,
        ds_dw,
        dn_dv,
        dn_dw,
    })
}

/// Full evaluation for either surface type.
pub fn evaluate(
    posed: &PosedMesh<'_>,
    kind: SurfaceKind,
    u: &SurfaceCoordinate,
) -> Result<SurfaceEvaluation, SurfaceError> {
    match kind {
        SurfaceKind::Phong => eval_phong(posed, u),
        SurfaceKind::TriMesh => eval_trimesh(posed, u),
    }
}

fn pose_blocks<'p>(posed: &'p PosedMesh<'_>, patch: usize) -> Option<([&'p Matrix3xX<f64>; 3], [&'p Matrix3xX<f64>; 3])> {
    let j = posed.jacobians.as_ref()?;
    let tri = posed.mesh.triangles()[patch];
    Some((tri.map(|i| &j.positions[i]), tri.map(|i| &j.normals[i])))
}

/// Phong surface: interpolated positions, normalized interpolated normals.
pub fn eval_phong(posed: &PosedMesh<'_>, u: &SurfaceCoordinate) -> Result<SurfaceEvaluation, SurfaceError> {
    let b = u.barycentric();
    let corners = posed.corners(u.patch);
    let cn = posed.corner_normals(u.patch);
    let position = blend(&b, &corners);
    let (c, len) = phong_direction(posed, u)?;
    let normal = c / len;
    let project = normalize_jacobian(&normal, len);

    let p_count = posed.parameter_count;
    let (ds_dtheta, dn_dtheta) = match pose_blocks(posed, u.patch) {
        Some((jp, jn)) => {
            let ds = jp[0] * b[0] + jp[1] * b[1] + jp[2] * b[2];
            let dc = jn[0] * b[0] + jn[1] * b[1] + jn[2] * b[2];
            (ds, project * dc)
        }
        None => (Matrix3xX::zeros(p_count), Matrix3xX::zeros(p_count)),
    };

    Ok(SurfaceEvaluation {
        position,
        normal,
        ds_dv: corners[1] - corners[0],
        ds_dw: corners[2] - corners[0],
        dn_dv: project * (cn[1] - cn[0]),
        dn_dw: project * (cn[2] - cn[0]),
        ds_dtheta,
        dn_dtheta,
    })
}

/// Flat triangle mesh: facet-constant normal.
pub fn eval_trimesh(posed: &PosedMesh<'_>, u: &SurfaceCoordinate) -> Result<SurfaceEvaluation, SurfaceError> {
    let b = u.barycentric();
    let corners = posed.corners(u.patch);
    let position = blend(&b, &corners);
    let e1 = corners[1] - corners[0];
    let e2 = corners[2] - corners[0];
    let (f, len) = face_direction(&corners, u.patch)?;
    let normal = f / len;

    let p_count = posed.parameter_count;
    let (ds_dtheta, dn_dtheta) = match pose_blocks(posed, u.patch) {
        Some((jp, _)) => {
            let ds = jp[0] * b[0] + jp[1] * b[1] + jp[2] * b[2];
            let de1 = jp[1] - jp[0];
            let de2 = jp[2] - jp[0];
            let df = crate::rotation::skew(&e1) * de2 - crate::rotation::skew(&e2) * de1;
            (ds, normalize_jacobian(&normal, len) * df)
        }
        None => (Matrix3xX::zeros(p_count), Matrix3xX::zeros(p_count)),
    };

    Ok(SurfaceEvaluation {
        position,
        normal,
        ds_dv: e1,
        ds_dw: e2,
        dn_dv: Vector3::zeros(),
        dn_dw: Vector3::zeros(),
        ds_dtheta,
        dn_dtheta,
    })
}
