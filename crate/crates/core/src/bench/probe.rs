//! Surface evaluation timing.

use std::hint::black_box;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::models::make_ellipsoid;
use super::sampling::uniform_barycentric;
use super::BenchError;
use crate::kinematics::{pose_rigid_values, RigidPose};
use crate::mesh::SurfaceCoordinate;
use crate::surfaces::{eval_point, eval_with_coordinate_derivatives, SurfaceKind};

/// Passes per measurement; the fastest is reported.
const PASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeResult {
    pub surface: SurfaceKind,
    pub count: usize,
    /// Position and normal only.
    pub eval_seconds: f64,
    /// Position, normal and their `v`, `w` derivatives.
    pub derivative_seconds: f64,
    pub flops_per_eval: u64,
    pub flops_per_derivative_eval: u64,
}

/// Floating point operations per evaluation, counting each add, multiply,
/// divide and square root once.
///
/// Both surfaces blend three corner positions (17). Phong blends the
/// normals and normalizes (24); the flat mesh forms two edges, their cross
/// product and normalizes (24). Derivatives add two edge differences for
/// Phong positions (6), two normal differences (6) and two tangent
/// projections (28); the flat mesh reuses its edges and has zero normal
/// derivatives.
pub fn flop_estimate(kind: SurfaceKind, with_derivatives: bool) -> u64 {
    match (kind, with_derivatives) {
        (SurfaceKind::Phong, false) => 41,
        (SurfaceKind::Phong, true) => 81,
        (SurfaceKind::TriMesh, _) => 41,
    }
}

fn best_of<F: FnMut()>(mut f: F) -> f64 {
    (0..PASSES)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Times `count` evaluations on the 320-facet ellipsoid at a fixed pose.
pub fn timing_probe(kind: SurfaceKind, count: usize) -> Result<ProbeResult, BenchError> {
    if count == 0 {
        return Err(BenchError::Config("probe count must be at least 1".into()));
    }
    let mesh = make_ellipsoid(320)?;
    let pose = RigidPose::new(nalgebra::Vector3::new(0.1, -0.2, 0.3), nalgebra::Vector3::new(0.4, 0.5, -0.6));
    let posed = pose_rigid_values(&mesh, &pose);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = mesh.triangle_count();
    let coords: Vec<SurfaceCoordinate> = (0..count)
        .map(|i| {
            let (v, w) = uniform_barycentric(&mut rng);
            SurfaceCoordinate { patch: i % n, v, w }
        })
        .collect();

    let eval_seconds = best_of(|| {
        for u in &coords {
            black_box(eval_point(&posed, kind, black_box(u)).ok());
        }
    });
    let derivative_seconds = best_of(|| {
        for u in &coords {
            black_box(eval_with_coordinate_derivatives(&posed, kind, black_box(u)).ok());
        }
    });
    Ok(ProbeResult {
        surface: kind,
        count,
        eval_seconds,
        derivative_seconds,
        flops_per_eval: flop_estimate(kind, false),
        flops_per_derivative_eval: flop_estimate(kind, true),
    })
}
