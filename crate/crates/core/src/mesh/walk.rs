//! Applying a correspondence update `u + delta` across triangle boundaries.
//!
//! Steps are carried out in barycentric form. When a step leaves the current
//! patch it is cut where it meets the boundary and the remainder is carried
//! into the neighbor through the shared edge. The remap treats the two
//! triangles as an unfolded parallelogram: the opposite corner of the current
//! patch maps to `a + b - c'` in the neighbor, so motion along the shared edge
//! is unchanged and motion away from the opposite corner becomes motion
//! towards the neighbor's interior. The map is an involution.

use nalgebra::Vector2;

use super::{ControlMesh, SurfaceCoordinate};

pub const DEFAULT_CROSSING_CAP: usize = 64;

/// Correspondence between the local corners of two triangles sharing an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCrossing {
    pub from_triangle: usize,
    pub from_edge: usize,
    pub to_triangle: usize,
    pub to_edge: usize,
    /// `corner_map[k]` is the neighbor's local index for local corner `k`
    /// of the source triangle; the opposite corner maps to the neighbor's
    /// opposite corner.
    pub corner_map: [usize; 3],
}

impl EdgeCrossing {
    /// Crossing data for leaving `triangle` through local edge `edge`.
    pub fn new(mesh: &ControlMesh, triangle: usize, edge: usize) -> Option<Self> {
        let link = mesh.adjacency().neighbor(triangle, edge)?;
        let src = mesh.triangles()[triangle];
        let dst = mesh.triangles()[link.triangle];
        let a = edge;
        let b = (edge + 1) % 3;
        let c = (edge + 2) % 3;
        let find = |g: usize| dst.iter().position(|&x| x == g);
        let a2 = find(src[a])?;
        let b2 = find(src[b])?;
        let c2 = 3 - a2 - b2;
        let mut corner_map = [0; 3];
        corner_map[a] = a2;
        corner_map[b] = b2;
        corner_map[c] = c2;
        Some(Self {
            from_triangle: triangle,
            from_edge: edge,
            to_triangle: link.triangle,
            to_edge: link.edge as usize,
            corner_map,
        })
    }

    fn opposite(&self) -> usize {
        (self.from_edge + 2) % 3
    }

    /// Maps a barycentric direction (components summing to zero).
    pub fn map_direction(&self, d: [f64; 3]) -> [f64; 3] {
        let c = self.opposite();
        let a = self.from_edge;
        let b = (a + 1) % 3;
        let mut out = [0.0; 3];
        out[self.corner_map[a]] = d[a] + d[c];
        out[self.corner_map[b]] = d[b] + d[c];
        out[self.corner_map[c]] = -d[c];
        out
    }

    /// Maps a point lying on the shared edge.
    pub fn map_point(&self, p: [f64; 3]) -> [f64; 3] {
        let a = self.from_edge;
        let b = (a + 1) % 3;
        let mut out = [0.0; 3];
        out[self.corner_map[a]] = p[a];
        out[self.corner_map[b]] = p[b];
        out
    }
}

/// Remaps a `(dv, dw)` step from the source patch into the neighbor's domain.
pub fn remap_across_edge(delta: Vector2<f64>, crossing: &EdgeCrossing) -> Vector2<f64> {
    let d = crossing.map_direction(to_barycentric_direction(delta));
    Vector2::new(d[1], d[2])
}

#[inline]
fn to_barycentric_direction(delta: Vector2<f64>) -> [f64; 3] {
    [-delta.x - delta.y, delta.x, delta.y]
}

/// Result of a walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOutcome {
    pub coordinate: SurfaceCoordinate,
    pub crossings: usize,
    /// The step was cut at a boundary edge.
    pub hit_boundary: bool,
    /// The crossing cap was reached before the step was used up.
    pub hit_cap: bool,
}

impl WalkOutcome {
    pub fn truncated(&self) -> bool {
        self.hit_boundary || self.hit_cap
    }
}

/// Applies `delta = (dv, dw)` to `u`, crossing into neighbors as needed.
///
/// At most `cap` edges are crossed. A step reaching a boundary edge stops on
/// that edge. When a step leaves through a corner the edge with the smaller
/// exit parameter is crossed, ties going to the lower local edge index.
pub fn walk(mesh: &ControlMesh, u: &SurfaceCoordinate, delta: Vector2<f64>, cap: usize) -> WalkOutcome {
    let mut patch = u.patch;
    let mut lam = u.barycentric();
    let mut dir = to_barycentric_direction(delta);
    let mut crossings = 0;
    let mut hit_boundary = false;
    let mut hit_cap = false;

    loop {
        // Exit parameter for each corner weight heading to zero.
        let mut exit: Option<(f64, usize)> = None;
        for k in 0..3 {
            if dir[k] < 0.0 {
                let r = lam[k].max(0.0) / -dir[k];
                if r < 1.0 {
                    let edge = (k + 1) % 3;
                    let better = match exit {
                        None => true,
                        Some((rb, eb)) => r < rb || (r == rb && edge < eb),
                    };
                    if better {
                        exit = Some((r, edge));
                    }
                }
            }
        }

        let Some((r, edge)) = exit else {
            for k in 0..3 {
                lam[k] += dir[k];
            }
            break;
        };

        let corner = (edge + 2) % 3;
        for k in 0..3 {
            lam[k] += r * dir[k];
            dir[k] *= 1.0 - r;
        }
        lam[corner] = 0.0;

        let Some(crossing) = EdgeCrossing::new(mesh, patch, edge) else {
            hit_boundary = true;
            break;
        };
        if crossings == cap {
            hit_cap = true;
            break;
        }
        crossings += 1;
        lam = crossing.map_point(lam);
        dir = crossing.map_direction(dir);
        patch = crossing.to_triangle;
    }

    WalkOutcome {
        coordinate: SurfaceCoordinate::from_barycentric(patch, lam),
        crossings,
        hit_boundary,
        hit_cap,
    }
}
