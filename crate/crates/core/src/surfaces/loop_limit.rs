//! Loop subdivision limit positions and normals at control vertices.
//!
//! For a vertex `x` of valence `n` with ordered 1-ring `q_0 .. q_{n-1}`:
//!
//! * limit position `(omega x + sum q_j) / (omega + n)` with
//!   `omega = 3 / (8 beta)` and Warren's `beta = 3/16` for `n = 3`,
//!   `3 / (8 n)` otherwise;
//! * tangents `sum cos(2 pi j / n) q_j` and `sum sin(2 pi j / n) q_j`, whose
//!   cross product gives the limit normal.
//!
//! The 1-ring is ordered counter-clockwise about the outward normal implied
//! by the triangle winding, so normals point the same way as face normals.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::Vector3;

use super::SurfaceError;
use crate::mesh::{ControlMesh, MeshError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopLimit {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Warren's simplified Loop vertex weight per neighbor.
fn warren_beta(valence: usize) -> f64 {
    if valence == 3 {
        3.0 / 16.0
    } else {
        3.0 / (8.0 * valence as f64)
    }
}

/// Counter-clockwise 1-ring of `vertex`, given its incident triangles.
pub fn one_ring(mesh: &ControlMesh, vertex: usize, incident: &[usize]) -> Result<Vec<usize>, SurfaceError> {
    // Each incident triangle contributes a directed rim edge next -> prev.
    let rim: Vec<(usize, usize)> = incident
        .iter()
        .map(|&t| {
            let tri = mesh.triangles()[t];
            let k = tri.iter().position(|&x| x == vertex).expect("incident triangle contains vertex");
            (tri[(k + 1) % 3], tri[(k + 2) % 3])
        })
        .collect();
    if rim.len() < 3 {
        return Err(SurfaceError::LowValence {
            vertex,
            valence: rim.len(),
        });
    }
    let mut ring = Vec::with_capacity(rim.len());
    let (first, mut next) = rim[0];
    ring.push(first);
    while next != first {
        if ring.len() >= rim.len() {
            return Err(SurfaceError::BoundaryVertex(vertex));
        }
        ring.push(next);
        next = match rim.iter().find(|(a, _)| *a == next) {
            Some(&(_, b)) => b,
            None => return Err(SurfaceError::BoundaryVertex(vertex)),
        };
    }
    if ring.len() != rim.len() {
        return Err(SurfaceError::BoundaryVertex(vertex));
    }
    Ok(ring)
}

fn stencil_from_ring(center: Vector3<f64>, ring: &[Vector3<f64>]) -> LoopLimit {
    let n = ring.len();
    let omega = 3.0 / (8.0 * warren_beta(n));
    let sum: Vector3<f64> = ring.iter().sum();
    let position = (center * omega + sum) / (omega + n as f64);
    let mut t1 = Vector3::zeros();
    let mut t2 = Vector3::zeros();
    for (j, q) in ring.iter().enumerate() {
        let (s, c) = (TAU * j as f64 / n as f64).sin_cos();
        t1 += q * c;
        t2 += q * s;
    }
    LoopLimit {
        position,
        normal: t1.cross(&t2).normalize(),
    }
}

/// Limit position and normal at one control vertex.
pub fn loop_limit_stencil(mesh: &ControlMesh, vertex: usize) -> Result<LoopLimit, SurfaceError> {
    let incident: Vec<usize> = (0..mesh.triangle_count())
        .filter(|&t| mesh.triangles()[t].contains(&vertex))
        .collect();
    let ring = one_ring(mesh, vertex, &incident)?;
    let pts: Vec<_> = ring.iter().map(|&i| mesh.positions()[i]).collect();
    Ok(stencil_from_ring(mesh.positions()[vertex], &pts))
}

/// A mesh with the same topology whose vertices are the Loop limit
/// positions and normals of `control`.
pub fn limit_mesh(control: &ControlMesh) -> Result<ControlMesh, LimitMeshError> {
    let incident = control.vertex_triangles();
    let mut positions = Vec::with_capacity(control.vertex_count());
    let mut normals = Vec::with_capacity(control.vertex_count());
    for v in 0..control.vertex_count() {
        let ring = one_ring(control, v, &incident[v])?;
        let pts: Vec<_> = ring.iter().map(|&i| control.positions()[i]).collect();
        let limit = stencil_from_ring(control.positions()[v], &pts);
        positions.push(limit.position);
        normals.push(limit.normal);
    }
    Ok(control.with_vertex_data(positions, normals)?)
}

/// One level of Loop subdivision of a closed mesh, using the same vertex
/// weights as the limit stencils. Vertex normals of the result are
/// area-weighted placeholders; pass it through [`limit_mesh`] for limit data.
pub fn loop_subdivide(control: &ControlMesh) -> Result<ControlMesh, LimitMeshError> {
    let incident = control.vertex_triangles();
    let p = control.positions();
    let mut positions = Vec::with_capacity(control.vertex_count() + 3 * control.triangle_count() / 2);
    for v in 0..control.vertex_count() {
        let ring = one_ring(control, v, &incident[v])?;
        let beta = warren_beta(ring.len());
        let sum: Vector3<f64> = ring.iter().map(|&i| p[i]).sum();
        positions.push(p[v] * (1.0 - ring.len() as f64 * beta) + sum * beta);
    }

    let mut edge_vertex = HashMap::new();
    let tris = control.triangles();
    for (t, tri) in tris.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let key = (a.min(b), a.max(b));
            if edge_vertex.contains_key(&key) {
                continue;
            }
            let link = control
                .adjacency()
                .neighbor(t, e)
                .ok_or(SurfaceError::BoundaryVertex(a))?;
            let c = tri[(e + 2) % 3];
            let d = tris[link.triangle][(link.edge as usize + 2) % 3];
            positions.push((p[a] + p[b]) * 0.375 + (p[c] + p[d]) * 0.125);
            edge_vertex.insert(key, positions.len() - 1);
        }
    }

    let mid = |a: usize, b: usize| edge_vertex[&(a.min(b), a.max(b))];
    let mut triangles = Vec::with_capacity(4 * tris.len());
    for &[a, b, c] in tris {
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    Ok(ControlMesh::from_geometry(positions, triangles)?)
}

#[derive(Debug, thiserror::Error)]
pub enum LimitMeshError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::{octahedron, square};

    fn hexagon_mesh(offset: Vector3<f64>, tilt: bool) -> ControlMesh {
        // Regular valence-6 fan around vertex 0, optionally in a tilted plane.
        let (e1, e2) = if tilt {
            (Vector3::new(1.0, 0.0, 1.0).normalize(), Vector3::y())
        } else {
            (Vector3::x(), Vector3::y())
        };
        let mut positions = vec![offset];
        for j in 0..6 {
            let a = TAU * j as f64 / 6.0;
            positions.push(offset + e1 * a.cos() + e2 * a.sin());
        }
        let triangles = (0..6).map(|j| [0, 1 + j, 1 + (j + 1) % 6]).collect();
        ControlMesh::from_geometry(positions, triangles).unwrap()
    }

    fn interior_stencil(mesh: &ControlMesh) -> LoopLimit {
        let incident: Vec<usize> = (0..mesh.triangle_count()).collect();
        let ring = one_ring(mesh, 0, &incident).unwrap();
        let pts: Vec<_> = ring.iter().map(|&i| mesh.positions()[i]).collect();
        stencil_from_ring(mesh.positions()[0], &pts)
    }

    #[test]
    fn planar_ring_stays_in_plane() {
        let mesh = hexagon_mesh(Vector3::zeros(), true);
        let limit = interior_stencil(&mesh);
        let plane_normal = Vector3::new(1.0, 0.0, 1.0).normalize().cross(&Vector3::y());
        assert!(limit.position.dot(&plane_normal).abs() < 1e-15);
        assert!((limit.normal - plane_normal).norm() < 1e-12);
    }

    #[test]
    fn translation_moves_limit_identically() {
        let shift = Vector3::new(0.5, -2.0, 3.25);
        let a = interior_stencil(&hexagon_mesh(Vector3::zeros(), false));
        let b = interior_stencil(&hexagon_mesh(shift, false));
        assert!((b.position - a.position - shift).norm() < 1e-14);
        assert!((b.normal - a.normal).norm() < 1e-14);
    }

    #[test]
    fn octahedron_normals_are_radial() {
        let mesh = octahedron();
        for v in 0..6 {
            let limit = loop_limit_stencil(&mesh, v).unwrap();
            let radial = mesh.positions()[v].normalize();
            assert!(limit.normal.cross(&radial).norm() < 1e-9, "vertex {v}");
            assert!(limit.normal.dot(&radial) > 0.0);
            // Valence 4: omega = 4, limit = (4 x + sum ring) / 8 = x / 2.
            assert!((limit.position - mesh.positions()[v] * 0.5).norm() < 1e-15);
        }
    }

    #[test]
    fn boundary_vertex_is_rejected() {
        let mesh = square();
        assert!(matches!(loop_limit_stencil(&mesh, 0), Err(SurfaceError::LowValence { .. } | SurfaceError::BoundaryVertex(_))));
        let mesh = hexagon_mesh(Vector3::zeros(), false);
        assert!(matches!(loop_limit_stencil(&mesh, 1), Err(_)));
    }

    #[test]
    fn limit_mesh_of_closed_mesh() {
        let mesh = limit_mesh(&octahedron()).unwrap();
        assert_eq!(mesh.vertex_count(), 6);
        for n in mesh.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn subdivision_keeps_limit_positions() {
        // Subdividing does not move the limit surface, so limit positions of
        // the original vertices are unchanged.
        let coarse = octahedron();
        let fine = loop_subdivide(&coarse).unwrap();
        assert_eq!(fine.triangle_count(), 32);
        assert_eq!(fine.vertex_count(), 18);
        let a = limit_mesh(&coarse).unwrap();
        let b = limit_mesh(&fine).unwrap();
        for v in 0..coarse.vertex_count() {
            assert!((a.positions()[v] - b.positions()[v]).norm() < 1e-14);
            assert!((a.normals()[v] - b.normals()[v]).norm() < 1e-12);
        }
    }
}
