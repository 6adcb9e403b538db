//! Compare the Phong and flat surfaces of one posed mesh.
//!
//! Positions agree; the normals differ by the interpolation. Prints the
//! angle between them at a few points and the normal jump across an edge.

use nalgebra::DVector;
use phong_fit::bench::make_ellipsoid;
use phong_fit::kinematics::{PoseModel, RigidModel};
use phong_fit::mesh::{EdgeCrossing, SurfaceCoordinate};
use phong_fit::surfaces::{eval_point, SurfaceKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = RigidModel::new(make_ellipsoid(320)?);
    let theta = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.4, 0.0, -0.5]);
    let posed = model.pose(&theta, false)?;

    for (patch, v, w) in [(0, 1.0 / 3.0, 1.0 / 3.0), (17, 0.1, 0.1), (200, 0.8, 0.15)] {
        let u = SurfaceCoordinate::new(patch, v, w)?;
        let phong = eval_point(&posed, SurfaceKind::Phong, &u)?;
        let flat = eval_point(&posed, SurfaceKind::TriMesh, &u)?;
        let angle = phong.normal.dot(&flat.normal).clamp(-1.0, 1.0).acos().to_degrees();
        println!("patch {patch:>3} ({v:.2}, {w:.2}): |dS| = {:.1e}, normal angle {angle:.3} deg", (phong.position - flat.position).norm());
    }

    // Midpoint of edge 0 of patch 0, seen from both sides.
    let crossing = EdgeCrossing::new(model.mesh(), 0, 0).ok_or("boundary edge")?;
    let here = SurfaceCoordinate::from_barycentric(0, [0.5, 0.5, 0.0]);
    let there = SurfaceCoordinate::from_barycentric(crossing.to_triangle, crossing.map_point([0.5, 0.5, 0.0]));
    for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
        let a = eval_point(&posed, kind, &here)?;
        let b = eval_point(&posed, kind, &there)?;
        println!("{kind:?} normal jump across the edge: {:.2e}", (a.normal - b.normal).norm());
    }
    Ok(())
}
