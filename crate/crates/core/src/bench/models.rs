//! Synthetic benchmark models.

use std::collections::HashMap;

use nalgebra::{DVector, Vector3};

use super::BenchError;
use crate::kinematics::{Affine, Joint, PoseModel, RigidModel, SkinnedModel};
use crate::mesh::ControlMesh;
use crate::surfaces::{limit_mesh, loop_subdivide};

/// Ellipsoid semi-axes along x, y and z.
pub const ELLIPSOID_RADII: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModelId {
    #[serde(rename = "ellipsoid-320")]
    Ellipsoid320,
    #[serde(rename = "ellipsoid-1280")]
    Ellipsoid1280,
    #[serde(rename = "chain3")]
    Chain3,
}

impl ModelId {
    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Ellipsoid320 => "ellipsoid-320",
            ModelId::Ellipsoid1280 => "ellipsoid-1280",
            ModelId::Chain3 => "chain3",
        }
    }

    pub fn is_rigid(&self) -> bool {
        !matches!(self, ModelId::Chain3)
    }
}

impl std::str::FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ellipsoid-320" => Ok(ModelId::Ellipsoid320),
            "ellipsoid-1280" => Ok(ModelId::Ellipsoid1280),
            "chain3" => Ok(ModelId::Chain3),
            other => Err(format!(
                "unknown model `{other}` (expected ellipsoid-320, ellipsoid-1280 or chain3)"
            )),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A benchmark model ready for fitting.
pub enum BenchModel {
    Rigid(RigidModel),
    Skinned(SkinnedModel),
}

impl BenchModel {
    pub fn build(id: ModelId) -> Result<Self, BenchError> {
        Ok(match id {
            ModelId::Ellipsoid320 => BenchModel::Rigid(RigidModel::new(make_ellipsoid(320)?)),
            ModelId::Ellipsoid1280 => BenchModel::Rigid(RigidModel::new(make_ellipsoid(1280)?)),
            ModelId::Chain3 => BenchModel::Skinned(make_chain3()?),
        })
    }

    /// Rigid model of the refined limit surface, for ellipsoids.
    pub fn reference(id: ModelId) -> Result<Option<RigidModel>, BenchError> {
        Ok(match id {
            ModelId::Ellipsoid320 => Some(RigidModel::new(ellipsoid_reference(320)?)),
            ModelId::Ellipsoid1280 => Some(RigidModel::new(ellipsoid_reference(1280)?)),
            ModelId::Chain3 => None,
        })
    }

    pub fn as_model(&self) -> &dyn PoseModel {
        match self {
            BenchModel::Rigid(m) => m,
            BenchModel::Skinned(m) => m,
        }
    }

    pub fn neutral(&self) -> DVector<f64> {
        DVector::zeros(self.as_model().parameter_count())
    }
}

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let positions = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vector3::from(*p).normalize())
    .collect();
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (positions, triangles)
}

/// One 1-to-4 split with new vertices pushed onto the unit sphere.
fn subdivide_sphere(positions: &mut Vec<Vector3<f64>>, triangles: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, positions: &mut Vec<Vector3<f64>>| {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            positions.push(((positions[a] + positions[b]) * 0.5).normalize());
            positions.len() - 1
        })
    };
    let mut out = Vec::with_capacity(triangles.len() * 4);
    for &[a, b, c] in triangles {
        let ab = midpoint(a, b, positions);
        let bc = midpoint(b, c, positions);
        let ca = midpoint(c, a, positions);
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    out
}

/// Control mesh of the subdivided icosphere scaled to [`ELLIPSOID_RADII`],
/// before limit projection.
pub fn ellipsoid_control(facets: usize) -> Result<ControlMesh, BenchError> {
    let levels = match facets {
        320 => 2,
        1280 => 3,
        other => return Err(BenchError::Model(format!("ellipsoid facet count {other} (expected 320 or 1280)"))),
    };
    let (mut positions, mut triangles) = icosahedron();
    for _ in 0..levels {
        triangles = subdivide_sphere(&mut positions, &triangles);
    }
    let scale = Vector3::from(ELLIPSOID_RADII);
    let positions: Vec<_> = positions.iter().map(|p| p.component_mul(&scale)).collect();
    Ok(ControlMesh::from_geometry(positions, triangles)?)
}

/// Ellipsoid model whose vertices carry Loop limit positions and normals.
pub fn make_ellipsoid(facets: usize) -> Result<ControlMesh, BenchError> {
    Ok(limit_mesh(&ellipsoid_control(facets)?)?)
}

/// Loop refinement levels of the reference surface used for sampling.
pub const REFERENCE_LEVELS: usize = 3;

/// Fine approximation of the ellipsoid's Loop limit surface: the control
/// mesh subdivided [`REFERENCE_LEVELS`] times, vertices moved to their limit
/// positions and normals.
pub fn ellipsoid_reference(facets: usize) -> Result<ControlMesh, BenchError> {
    let mut mesh = ellipsoid_control(facets)?;
    for _ in 0..REFERENCE_LEVELS {
        mesh = loop_subdivide(&mesh)?;
    }
    Ok(limit_mesh(&mesh)?)
}

/// Chain geometry.
pub const CHAIN_LENGTH: f64 = 3.0;
pub const CHAIN_RADIUS: f64 = 0.3;
const CHAIN_RINGS: usize = 31;
const CHAIN_SIDES: usize = 12;
/// Half-width of the weight blend around each joint.
const CHAIN_BLEND: f64 = 0.2;

/// Closed capped cylinder along x with Loop limit vertex data.
pub fn chain_mesh() -> Result<ControlMesh, BenchError> {
    let mut positions = Vec::new();
    for r in 0..CHAIN_RINGS {
        let x = CHAIN_LENGTH * r as f64 / (CHAIN_RINGS - 1) as f64;
        for s in 0..CHAIN_SIDES {
            let a = std::f64::consts::TAU * s as f64 / CHAIN_SIDES as f64;
            positions.push(Vector3::new(x, CHAIN_RADIUS * a.cos(), CHAIN_RADIUS * a.sin()));
        }
    }
    let start_cap = positions.len();
    positions.push(Vector3::zeros());
    let end_cap = positions.len();
    positions.push(Vector3::new(CHAIN_LENGTH, 0.0, 0.0));

    let idx = |r: usize, s: usize| r * CHAIN_SIDES + s % CHAIN_SIDES;
    let mut triangles = Vec::new();
    for r in 0..CHAIN_RINGS - 1 {
        for s in 0..CHAIN_SIDES {
            // Outward winding: the ring angle increases counter-clockwise about +x.
            triangles.push([idx(r, s), idx(r, s + 1), idx(r + 1, s + 1)]);
            triangles.push([idx(r, s), idx(r + 1, s + 1), idx(r + 1, s)]);
        }
    }
    for s in 0..CHAIN_SIDES {
        triangles.push([start_cap, idx(0, s + 1), idx(0, s)]);
        triangles.push([end_cap, idx(CHAIN_RINGS - 1, s), idx(CHAIN_RINGS - 1, s + 1)]);
    }
    let control = ControlMesh::from_geometry(positions, triangles)?;
    Ok(limit_mesh(&control)?)
}

/// Weight of the child segment at `x` for a joint at `pivot`.
fn ramp(x: f64, pivot: f64) -> f64 {
    ((x - pivot + CHAIN_BLEND) / (2.0 * CHAIN_BLEND)).clamp(0.0, 1.0)
}

/// Three-segment skinned chain: a fixed root, a hinge about z at `x = 1` and
/// a hinge about y at `x = 2`. Parameters are the root pose plus two angles.
pub fn make_chain3() -> Result<SkinnedModel, BenchError> {
    let mesh = chain_mesh()?;
    let joints = vec![
        Joint {
            name: "root".into(),
            parent: None,
            rest: Affine::identity(),
            axis: None,
        },
        Joint {
            name: "elbow".into(),
            parent: Some(0),
            rest: Affine::translation(Vector3::new(1.0, 0.0, 0.0)),
            axis: Some(Vector3::z()),
        },
        Joint {
            name: "wrist".into(),
            parent: Some(1),
            rest: Affine::translation(Vector3::new(1.0, 0.0, 0.0)),
            axis: Some(Vector3::y()),
        },
    ];
    let mut weights = Vec::new();
    for (v, p) in mesh.positions().iter().enumerate() {
        let a = ramp(p.x, 1.0);
        let b = ramp(p.x, 2.0);
        for (j, w) in [(0, 1.0 - a), (1, a - b), (2, b)] {
            if w > 0.0 {
                weights.push((v, j, w));
            }
        }
    }
    Ok(SkinnedModel::new(mesh, joints, &weights, None)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_adjacency;

    fn euler(mesh: &ControlMesh) -> i64 {
        let adj = build_adjacency(mesh.triangles()).unwrap();
        let e = adj.interior_edge_count() + adj.boundary_edge_count();
        mesh.vertex_count() as i64 - e as i64 + mesh.triangle_count() as i64
    }

    #[test]
    fn ellipsoids_are_closed_spheres() {
        for (facets, vertices) in [(320, 162), (1280, 642)] {
            let mesh = make_ellipsoid(facets).unwrap();
            assert_eq!(mesh.triangle_count(), facets);
            assert_eq!(mesh.vertex_count(), vertices);
            assert!(mesh.is_closed());
            assert_eq!(euler(&mesh), 2);
        }
    }

    #[test]
    fn control_radii_before_limit_projection() {
        let mesh = ellipsoid_control(320).unwrap();
        for axis in 0..3 {
            let max = mesh.positions().iter().map(|p| p[axis].abs()).fold(0.0, f64::max);
            assert!((max - ELLIPSOID_RADII[axis]).abs() < 1e-12, "axis {axis}: {max}");
        }
    }

    #[test]
    fn limit_projection_shrinks_the_ellipsoid() {
        // Loop limit points sit inside the convex control polytope.
        let mesh = make_ellipsoid(320).unwrap();
        for axis in 0..3 {
            let max = mesh.positions().iter().map(|p| p[axis].abs()).fold(0.0, f64::max);
            let ratio = max / ELLIPSOID_RADII[axis];
            assert!(ratio > 0.95 && ratio < 1.0, "axis {axis}: {ratio}");
        }
    }

    #[test]
    fn finer_ellipsoid_has_four_times_the_facets() {
        let coarse = make_ellipsoid(320).unwrap();
        let fine = make_ellipsoid(1280).unwrap();
        assert_eq!(fine.triangle_count(), 4 * coarse.triangle_count());
        assert!(make_ellipsoid(500).is_err());
    }

    #[test]
    fn outward_normals() {
        let mesh = make_ellipsoid(320).unwrap();
        for (p, n) in mesh.positions().iter().zip(mesh.normals()) {
            assert!(p.dot(n) > 0.0);
        }
        let chain = chain_mesh().unwrap();
        assert!(chain.is_closed());
        assert_eq!(euler(&chain), 2);
        let axis_point = |p: &Vector3<f64>| Vector3::new(p.x.clamp(0.1, 2.9), 0.0, 0.0);
        for (p, n) in chain.positions().iter().zip(chain.normals()) {
            assert!((p - axis_point(p)).dot(n) > 0.0);
        }
    }

    #[test]
    fn chain_weights_and_parameters() {
        let model = make_chain3().unwrap();
        assert_eq!(model.parameter_count(), 8);
        let posed = model.pose(&DVector::zeros(8), false).unwrap();
        for (a, b) in posed.positions.iter().zip(model.mesh().positions()) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
