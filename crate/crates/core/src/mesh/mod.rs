//! Triangulated control meshes, surface coordinates and correspondence walking.

mod adjacency;
mod io;
mod walk;

pub use adjacency::{build_adjacency, EdgeAdjacency, EdgeLink};
pub use io::{read_mesh, read_mesh_file, write_mesh, write_mesh_file};
pub use walk::{remap_across_edge, walk, EdgeCrossing, WalkOutcome, DEFAULT_CROSSING_CAP};

use nalgebra::Vector3;
use thiserror::Error;

/// Tolerance on vertex normal length.
pub const NORMAL_TOLERANCE: f64 = 1e-9;

/// Slack allowed on barycentric bounds after clamping.
pub const COORDINATE_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has no triangles")]
    Empty,
    #[error("triangle {triangle} references vertex {vertex} but the mesh has {count} vertices")]
    VertexOutOfRange {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),
    #[error("vertex normal {index} has length {length}, expected unit length")]
    NonUnitNormal { index: usize, length: f64 },
    #[error("{positions} vertex positions but {normals} vertex normals")]
    NormalCountMismatch { positions: usize, normals: usize },
    #[error("edge ({a}, {b}) is shared by {count} triangles; the mesh must be manifold")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("surface coordinate ({v}, {w}) on patch {patch} is outside the unit triangle")]
    InvalidCoordinate { patch: usize, v: f64, w: f64 },
    #[error("patch {patch} does not exist (mesh has {count} triangles)")]
    PatchOutOfRange { patch: usize, count: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A point on a triangulated surface: patch index plus barycentric pair.
///
/// The patch corners sit at `(v, w) = (0, 0)`, `(1, 0)` and `(0, 1)`, so the
/// surface point is `(1 - v - w) * a + v * b + w * c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceCoordinate {
    pub patch: usize,
    pub v: f64,
    pub w: f64,
}

impl SurfaceCoordinate {
    pub fn new(patch: usize, v: f64, w: f64) -> Result<Self, MeshError> {
        let c = Self { patch, v, w };
        if c.is_valid() {
            Ok(c)
        } else {
            Err(MeshError::InvalidCoordinate { patch, v, w })
        }
    }

    /// Builds a coordinate from barycentric weights, clamping small negative
    /// values produced by rounding. The first weight is implied by the others.
    pub fn from_barycentric(patch: usize, weights: [f64; 3]) -> Self {
        let mut v = weights[1].max(0.0);
        let mut w = weights[2].max(0.0);
        let sum = v + w;
        if sum > 1.0 {
            v /= sum;
            w /= sum;
        }
        Self { patch, v, w }
    }

    pub fn barycentric(&self) -> [f64; 3] {
        [1.0 - self.v - self.w, self.v, self.w]
    }

    pub fn is_valid(&self) -> bool {
        self.v.is_finite()
            && self.w.is_finite()
            && self.v >= -COORDINATE_SLACK
            && self.w >= -COORDINATE_SLACK
            && self.v + self.w <= 1.0 + COORDINATE_SLACK
    }
}

/// Control mesh: vertex positions and unit normals over a fixed triangulation.
///
/// Immutable after construction. Edge adjacency is built once and is what
/// [`walk`] follows.
#[derive(Debug, Clone)]
pub struct ControlMesh {
    positions: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    adjacency: EdgeAdjacency,
}

impl ControlMesh {
    pub fn new(
        positions: Vec<Vector3<f64>>,
        normals: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        if positions.len() != normals.len() {
            return Err(MeshError::NormalCountMismatch {
                positions: positions.len(),
                normals: normals.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let length = n.norm();
            if !((length - 1.0).abs() <= NORMAL_TOLERANCE) {
                return Err(MeshError::NonUnitNormal { index, length });
            }
        }
        validate_triangles(&positions, &triangles)?;
        let adjacency = build_adjacency(&triangles)?;
        Ok(Self {
            positions,
            normals,
            triangles,
            adjacency,
        })
    }

    /// Builds a mesh whose vertex normals are area-weighted face normals.
    pub fn from_geometry(
        positions: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        validate_triangles(&positions, &triangles)?;
        let normals = area_weighted_normals(&positions, &triangles);
        Self::new(positions, normals, triangles)
    }

    /// Same topology, new vertex data.
    pub fn with_vertex_data(
        &self,
        positions: Vec<Vector3<f64>>,
        normals: Vec<Vector3<f64>>,
    ) -> Result<Self, MeshError> {
        Self::new(positions, normals, self.triangles.clone())
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn adjacency(&self) -> &EdgeAdjacency {
        &self.adjacency
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_closed(&self) -> bool {
        self.adjacency.boundary_edge_count() == 0
    }

    /// Rest-pose surface point at `u`.
    pub fn point_at(&self, u: &SurfaceCoordinate) -> Vector3<f64> {
        let [a, b, c] = self.triangles[u.patch];
        let [wa, wb, wc] = u.barycentric();
        self.positions[a] * wa + self.positions[b] * wb + self.positions[c] * wc
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let p = &self.positions;
        0.5 * (p[b] - p[a]).cross(&(p[c] - p[a])).norm()
    }

    /// Unnormalized face normal following the vertex winding.
    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let p = &self.positions;
        (p[b] - p[a]).cross(&(p[c] - p[a]))
    }

    pub fn check_coordinate(&self, u: &SurfaceCoordinate) -> Result<(), MeshError> {
        if u.patch >= self.triangles.len() {
            return Err(MeshError::PatchOutOfRange {
                patch: u.patch,
                count: self.triangles.len(),
            });
        }
        if !u.is_valid() {
            return Err(MeshError::InvalidCoordinate {
                patch: u.patch,
                v: u.v,
                w: u.w,
            });
        }
        Ok(())
    }

    /// Triangles incident to each vertex, in ascending triangle order.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.positions.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }
}

fn validate_triangles(positions: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Result<(), MeshError> {
    let count = positions.len();
    for (t, tri) in triangles.iter().enumerate() {
        for &vertex in tri {
            if vertex >= count {
                return Err(MeshError::VertexOutOfRange {
                    triangle: t,
                    vertex,
                    count,
                });
            }
        }
        let [a, b, c] = *tri;
        if a == b || b == c || a == c {
            return Err(MeshError::DegenerateTriangle(t));
        }
        let e1 = positions[b] - positions[a];
        let e2 = positions[c] - positions[a];
        let scale = e1.norm_squared().max(e2.norm_squared());
        if !(e1.cross(&e2).norm() > 1e-14 * scale) {
            return Err(MeshError::DegenerateTriangle(t));
        }
    }
    Ok(())
}

/// Area-weighted vertex normals from face cross products.
pub fn area_weighted_normals(positions: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Vec<Vector3<f64>> {
    let mut acc = vec![Vector3::zeros(); positions.len()];
    for &[a, b, c] in triangles {
        let n = (positions[b] - positions[a]).cross(&(positions[c] - positions[a]));
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vector3::z()
            }
        })
        .collect()
}
