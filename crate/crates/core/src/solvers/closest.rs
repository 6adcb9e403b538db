use nalgebra::Vector3;

use crate::kinematics::PosedMesh;
use crate::mesh::SurfaceCoordinate;

/// Closest point on triangle `abc` to `p` as `(v, w, squared distance)`,
/// with the point at `(1 - v - w) a + v b + w c`.
pub fn closest_on_triangle(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> (f64, f64, f64) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    let (v, w) = 'region: {
        if d1 <= 0.0 && d2 <= 0.0 {
            break 'region (0.0, 0.0);
        }
        let bp = p - b;
        let d3 = ab.dot(&bp);
        let d4 = ac.dot(&bp);
        if d3 >= 0.0 && d4 <= d3 {
            break 'region (1.0, 0.0);
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            break 'region (d1 / (d1 - d3), 0.0);
        }
        let cp = p - c;
        let d5 = ab.dot(&cp);
        let d6 = ac.dot(&cp);
        if d6 >= 0.0 && d5 <= d6 {
            break 'region (0.0, 1.0);
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            break 'region (0.0, d2 / (d2 - d6));
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            break 'region (1.0 - t, t);
        }
        let denom = 1.0 / (va + vb + vc);
        (vb * denom, vc * denom)
    };
    let q = a * (1.0 - v - w) + b * v + c * w;
    (v, w, (q - p).norm_squared())
}

/// Bounding spheres over posed triangles for pruned nearest-point queries.
///
/// Results are identical to a full scan: a triangle is only skipped when its
/// sphere proves it cannot reach the current best distance, and equal
/// distances resolve to the lowest triangle index.
#[derive(Debug, Clone)]
pub struct ClosestPointQuery {
    centers: Vec<Vector3<f64>>,
    radii: Vec<f64>,
}

impl ClosestPointQuery {
    pub fn new(posed: &PosedMesh<'_>) -> Self {
        let n = posed.triangles().len();
        let mut centers = Vec::with_capacity(n);
        let mut radii = Vec::with_capacity(n);
        for t in 0..n {
            let [a, b, c] = posed.corners(t);
            let m = (a + b + c) / 3.0;
            let r = (a - m).norm().max((b - m).norm()).max((c - m).norm());
            centers.push(m);
            radii.push(r);
        }
        Self { centers, radii }
    }

    /// Closest surface coordinate to `x` and its squared distance.
    pub fn query(&self, posed: &PosedMesh<'_>, x: &Vector3<f64>) -> (SurfaceCoordinate, f64) {
        let project = |t: usize| {
            let [a, b, c] = posed.corners(t);
            closest_on_triangle(x, &a, &b, &c)
        };

        // Seed with the triangle whose sphere is nearest.
        let mut seed = 0;
        let mut seed_bound = f64::INFINITY;
        for (t, (m, r)) in self.centers.iter().zip(&self.radii).enumerate() {
            let bound = (m - x).norm() - r;
            if bound < seed_bound {
                seed_bound = bound;
                seed = t;
            }
        }
        let (sv, sw, sd) = project(seed);
        let mut best = (seed, sv, sw, sd);

        for t in 0..self.centers.len() {
            if t == seed {
                continue;
            }
            let reach = best.3.sqrt() + self.radii[t];
            let gap = (self.centers[t] - x).norm_squared();
            if gap > reach * reach * (1.0 + 1e-9) {
                continue;
            }
            let (v, w, d) = project(t);
            if d < best.3 || (d == best.3 && t < best.0) {
                best = (t, v, w, d);
            }
        }
        (
            SurfaceCoordinate {
                patch: best.0,
                v: best.1,
                w: best.2,
            },
            best.3,
        )
    }
}

/// Surface coordinate nearest to `x` on the posed geometry.
pub fn closest_point(posed: &PosedMesh<'_>, x: &Vector3<f64>) -> SurfaceCoordinate {
    ClosestPointQuery::new(posed).query(posed, x).0
}

/// Closest coordinates for a batch of points sharing one posed mesh.
pub fn closest_points<'a>(posed: &PosedMesh<'_>, xs: impl IntoIterator<Item = &'a Vector3<f64>>) -> Vec<SurfaceCoordinate> {
    let index = ClosestPointQuery::new(posed);
    xs.into_iter().map(|x| index.query(posed, x).0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{pose_rigid_values, RigidPose};
    use crate::mesh::fixtures::octahedron;
    use crate::mesh::ControlMesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full_scan(posed: &PosedMesh<'_>, x: &Vector3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for t in 0..posed.triangles().len() {
            let [a, b, c] = posed.corners(t);
            let d = closest_on_triangle(x, &a, &b, &c).2;
            if d < best.1 {
                best = (t, d);
            }
        }
        best
    }

    #[test]
    fn vertex_query_picks_lowest_incident_patch() {
        let mesh = octahedron();
        let posed = pose_rigid_values(&mesh, &RigidPose::identity());
        for v in 0..mesh.vertex_count() {
            let u = closest_point(&posed, &mesh.positions()[v]);
            let lowest = (0..mesh.triangle_count()).find(|&t| mesh.triangles()[t].contains(&v)).unwrap();
            assert_eq!(u.patch, lowest);
            assert!((mesh.point_at(&u) - mesh.positions()[v]).norm() < 1e-15);
        }
    }

    #[test]
    fn interior_projection_of_single_triangle() {
        let mesh = ControlMesh::from_geometry(
            vec![Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0), Vector3::new(0.0, 2.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let posed = pose_rigid_values(&mesh, &RigidPose::identity());
        let u = closest_point(&posed, &Vector3::new(0.5, 0.3, 4.0));
        assert_eq!(u.patch, 0);
        assert!((u.v - 0.25).abs() < 1e-15 && (u.w - 0.15).abs() < 1e-15);
    }

    #[test]
    fn every_voronoi_region_is_handled() {
        let a = Vector3::zeros();
        let b = Vector3::new(1.0, 0.0, 0.0);
        let c = Vector3::new(0.0, 1.0, 0.0);
        let cases = [
            (Vector3::new(-1.0, -1.0, 0.3), (0.0, 0.0)),
            (Vector3::new(2.0, -0.5, 0.0), (1.0, 0.0)),
            (Vector3::new(-0.5, 3.0, 1.0), (0.0, 1.0)),
            (Vector3::new(0.4, -2.0, 0.0), (0.4, 0.0)),
            (Vector3::new(-2.0, 0.7, 0.0), (0.0, 0.7)),
            (Vector3::new(1.0, 1.0, 0.5), (0.5, 0.5)),
            (Vector3::new(0.2, 0.3, -1.0), (0.2, 0.3)),
        ];
        for (p, (v, w)) in cases {
            let (gv, gw, _) = closest_on_triangle(&p, &a, &b, &c);
            assert!((gv - v).abs() < 1e-15 && (gw - w).abs() < 1e-15, "{p:?}: {gv} {gw}");
        }
    }

    #[test]
    fn pruned_query_matches_full_scan() {
        let mesh = octahedron();
        let posed = pose_rigid_values(&mesh, &RigidPose::new(Vector3::new(0.2, -0.1, 0.3), Vector3::new(0.4, 0.1, -0.7)));
        let index = ClosestPointQuery::new(&posed);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let x = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let (u, d) = index.query(&posed, &x);
            let (t, full) = full_scan(&posed, &x);
            assert_eq!(d, full);
            assert_eq!(u.patch, t);
        }
    }
}
