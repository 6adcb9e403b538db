//! Finite-difference and independent-oracle checks shared by the
//! integration targets.

#![allow(dead_code)]

use nalgebra::{DVector, Vector2, Vector3};
use phong_fit::bench::{make_chain3, make_ellipsoid};
use phong_fit::curve2d::{lifted2d_energy, lifted2d_gradient, Curve2D, RigidPose2D};
use phong_fit::energy::{assemble, energy_only, Observation};
use phong_fit::kinematics::{PoseModel, PosedMesh, RigidModel};
use phong_fit::mesh::SurfaceCoordinate;
use phong_fit::surfaces::{eval_point, eval_with_coordinate_derivatives, evaluate, SurfaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
/// Magnitudes below this are compared absolutely.
pub const FLOOR: f64 = 1e-3;

/// Worst relative error over a family of instances.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    pub max_rel: f64,
}

impl Check {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            instances: 0,
            max_rel: 0.0,
        }
    }

    fn record<const R: usize>(&mut self, fd: &nalgebra::SVector<f64, R>, an: &nalgebra::SVector<f64, R>) {
        let e = (fd - an).norm() / an.norm().max(fd.norm()).max(FLOOR);
        self.max_rel = self.max_rel.max(e);
    }

    fn record_scalar(&mut self, fd: f64, an: f64) {
        self.record(&nalgebra::Vector1::new(fd), &nalgebra::Vector1::new(an));
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ellipsoid_model() -> RigidModel {
    RigidModel::new(make_ellipsoid(320).unwrap())
}

pub fn random_theta<R: Rng>(rng: &mut R, p: usize) -> DVector<f64> {
    DVector::from_iterator(
        p,
        (0..p).map(|k| match k {
            0..=2 => rng.random_range(-1.0..1.0),
            3..=5 => rng.random_range(-1.5..1.5),
            _ => rng.random_range(-0.8..0.8),
        }),
    )
}

/// A coordinate far enough inside its patch for central differences.
pub fn interior_coordinate<R: Rng>(rng: &mut R, patches: usize) -> SurfaceCoordinate {
    loop {
        let v = rng.random_range(0.02..0.96);
        let w = rng.random_range(0.02..0.96);
        if v + w < 0.96 {
            return SurfaceCoordinate::new(rng.random_range(0..patches), v, w).unwrap();
        }
    }
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Observations scattered around the posed surface.
pub fn random_observations<R: Rng>(rng: &mut R, posed: &PosedMesh<'_>, count: usize) -> Vec<Observation> {
    let n = posed.mesh.triangle_count();
    (0..count)
        .map(|_| {
            let u = interior_coordinate(rng, n);
            let s = eval_point(posed, SurfaceKind::Phong, &u).unwrap();
            let offset = Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            let normal = (s.normal + random_unit(rng) * 0.3).normalize();
            Observation::new(s.position + offset, normal).unwrap()
        })
        .collect()
}

fn shifted(u: &SurfaceCoordinate, dv: f64, dw: f64) -> SurfaceCoordinate {
    SurfaceCoordinate {
        patch: u.patch,
        v: u.v + dv,
        w: u.w + dw,
    }
}

/// `dS/dv`, `dS/dw`, `dN/dv`, `dN/dw` from both evaluation paths.
pub fn surface_coordinate_check(kind: SurfaceKind, instances: usize) -> Check {
    let mut check = Check::new(format!("surface {kind} d/du"));
    let model = ellipsoid_model();
    let mut rng = rng(11);
    for _ in 0..instances {
        let theta = random_theta(&mut rng, 6);
        let posed = model.pose(&theta, true).unwrap();
        let u = interior_coordinate(&mut rng, posed.mesh.triangle_count());
        let fast = eval_with_coordinate_derivatives(&posed, kind, &u).unwrap();
        let full = evaluate(&posed, kind, &u).unwrap();
        for (dv, dw, ds, dn, ds_full, dn_full) in [
            (STEP, 0.0, fast.ds_dv, fast.dn_dv, full.ds_dv, full.dn_dv),
            (0.0, STEP, fast.ds_dw, fast.dn_dw, full.ds_dw, full.dn_dw),
        ] {
            let a = eval_point(&posed, kind, &shifted(&u, dv, dw)).unwrap();
            let b = eval_point(&posed, kind, &shifted(&u, -dv, -dw)).unwrap();
            let fd_s = (a.position - b.position) / (2.0 * STEP);
            let fd_n = (a.normal - b.normal) / (2.0 * STEP);
            check.record(&fd_s, &ds);
            check.record(&fd_n, &dn);
            check.record(&fd_s, &ds_full);
            check.record(&fd_n, &dn_full);
        }
        check.instances += 1;
    }
    check
}

/// `dS/dtheta` and `dN/dtheta` through a pose model.
pub fn surface_theta_check(kind: SurfaceKind, model: &dyn PoseModel, label: &str, instances: usize) -> Check {
    let mut check = Check::new(format!("surface {kind} d/dtheta ({label})"));
    let p = model.parameter_count();
    let mut rng = rng(12);
    for _ in 0..instances {
        let theta = random_theta(&mut rng, p);
        let posed = model.pose(&theta, true).unwrap();
        let u = interior_coordinate(&mut rng, posed.mesh.triangle_count());
        let e = evaluate(&posed, kind, &u).unwrap();
        for k in 0..p {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += STEP;
            tm[k] -= STEP;
            let a = eval_point(&model.pose(&tp, false).unwrap(), kind, &u).unwrap();
            let b = eval_point(&model.pose(&tm, false).unwrap(), kind, &u).unwrap();
            check.record(&((a.position - b.position) / (2.0 * STEP)), &e.ds_dtheta.column(k).into_owned());
            check.record(&((a.normal - b.normal) / (2.0 * STEP)), &e.dn_dtheta.column(k).into_owned());
        }
        check.instances += 1;
    }
    check
}

/// Vertex position and normal Jacobians of a pose model.
pub fn kinematic_check(model: &dyn PoseModel, label: &str, instances: usize) -> Check {
    let mut check = Check::new(format!("kinematics {label}"));
    let p = model.parameter_count();
    let n = model.mesh().vertex_count();
    let mut rng = rng(13);
    for _ in 0..instances {
        let theta = random_theta(&mut rng, p);
        let posed = model.pose(&theta, true).unwrap();
        let jac = posed.jacobians.as_ref().unwrap();
        let vertices: Vec<usize> = (0..16).map(|_| rng.random_range(0..n)).collect();
        for k in 0..p {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += STEP;
            tm[k] -= STEP;
            let a = model.pose(&tp, false).unwrap();
            let b = model.pose(&tm, false).unwrap();
            for &i in &vertices {
                let fd_p = (a.positions[i] - b.positions[i]) / (2.0 * STEP);
                let fd_n = (a.normals[i] - b.normals[i]) / (2.0 * STEP);
                check.record(&fd_p, &jac.positions[i].column(k).into_owned());
                check.record(&fd_n, &jac.normals[i].column(k).into_owned());
            }
        }
        check.instances += 1;
    }
    check
}

/// `dE/dtheta` and `dE/du_i` against differences of the plain energy.
pub fn energy_check(kind: SurfaceKind, model: &dyn PoseModel, label: &str, instances: usize) -> Check {
    let mut check = Check::new(format!("energy {kind} ({label})"));
    let p = model.parameter_count();
    let mut rng = rng(14);
    for _ in 0..instances {
        let theta = random_theta(&mut rng, p);
        let posed = model.pose(&theta, true).unwrap();
        let count = 6;
        let data = random_observations(&mut rng, &posed, count);
        let u: Vec<_> = (0..count).map(|_| interior_coordinate(&mut rng, posed.mesh.triangle_count())).collect();
        let lambda = rng.random_range(0.0..2.0);
        let system = assemble(&posed, kind, &u, &data, lambda).unwrap();
        let grad = system.gradient_theta() * 2.0;
        for k in 0..p {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += STEP;
            tm[k] -= STEP;
            let a = energy_only(&model.pose(&tp, false).unwrap(), kind, &u, &data, lambda).unwrap();
            let b = energy_only(&model.pose(&tm, false).unwrap(), kind, &u, &data, lambda).unwrap();
            check.record_scalar((a - b) / (2.0 * STEP), grad[k]);
        }
        for i in 0..count {
            let g = system.gradient_u(i) * 2.0;
            let mut fd = Vector2::zeros();
            for (c, (dv, dw)) in [(STEP, 0.0), (0.0, STEP)].into_iter().enumerate() {
                let mut up = u.clone();
                let mut um = u.clone();
                up[i] = shifted(&u[i], dv, dw);
                um[i] = shifted(&u[i], -dv, -dw);
                let a = energy_only(&posed, kind, &up, &data, lambda).unwrap();
                let b = energy_only(&posed, kind, &um, &data, lambda).unwrap();
                fd[c] = (a - b) / (2.0 * STEP);
            }
            check.record(&fd, &g);
        }
        check.instances += 1;
    }
    check
}

/// Gradient of the lifted 2D curve objective.
pub fn curve2d_check(instances: usize) -> Check {
    let mut check = Check::new("curve2d lifted objective");
    let curve = Curve2D::ellipse(2.0, 1.0).unwrap();
    let mut rng = rng(15);
    for _ in 0..instances {
        let pose = RigidPose2D::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0));
        let data: Vec<Vector2<f64>> = (0..8).map(|_| Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
        let t: Vec<f64> = (0..8).map(|_| rng.random()).collect();
        let (g, gt) = lifted2d_gradient(&curve, &pose, &data, &t).unwrap();
        let p0 = pose.to_vector();
        let e = |p: &Vector3<f64>, t: &[f64]| lifted2d_energy(&curve, &RigidPose2D::from_vector(p), &data, t).unwrap();
        let mut fd = Vector3::zeros();
        for k in 0..3 {
            let mut a = p0;
            let mut b = p0;
            a[k] += STEP;
            b[k] -= STEP;
            fd[k] = (e(&a, &t) - e(&b, &t)) / (2.0 * STEP);
        }
        check.record(&fd, &g);
        for i in 0..t.len() {
            let mut a = t.clone();
            let mut b = t.clone();
            a[i] += STEP;
            b[i] -= STEP;
            check.record_scalar((e(&p0, &a) - e(&p0, &b)) / (2.0 * STEP), gt[i]);
        }
        check.instances += 1;
    }
    check
}

/// Every gradient family, at least `instances` each.
pub fn gradient_suite(instances: usize) -> Vec<Check> {
    let rigid = ellipsoid_model();
    let chain = make_chain3().unwrap();
    let mut out = Vec::new();
    for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
        out.push(surface_coordinate_check(kind, instances));
        out.push(surface_theta_check(kind, &rigid, "rigid", instances));
        out.push(surface_theta_check(kind, &chain, "skinned", instances));
        out.push(energy_check(kind, &rigid, "rigid", instances));
        out.push(energy_check(kind, &chain, "skinned", instances));
    }
    out.push(kinematic_check(&rigid, "rigid", instances));
    out.push(kinematic_check(&chain, "skinned", instances));
    out.push(curve2d_check(instances));
    out
}

/// The lifted energy summed directly from posed vertex data, without the
/// surface or energy modules.
pub fn reference_energy(
    posed: &PosedMesh<'_>,
    kind: SurfaceKind,
    u: &[SurfaceCoordinate],
    data: &[Observation],
    lambda_n: f64,
) -> f64 {
    let mut sum = 0.0;
    for (ui, obs) in u.iter().zip(data) {
        let [i, j, k] = posed.mesh.triangles()[ui.patch];
        let a = 1.0 - ui.v - ui.w;
        let s = posed.positions[i] * a + posed.positions[j] * ui.v + posed.positions[k] * ui.w;
        let n = match kind {
            SurfaceKind::Phong => (posed.normals[i] * a + posed.normals[j] * ui.v + posed.normals[k] * ui.w).normalize(),
            SurfaceKind::TriMesh => (posed.positions[j] - posed.positions[i])
                .cross(&(posed.positions[k] - posed.positions[i]))
                .normalize(),
        };
        sum += (s - obs.point).norm_squared() + lambda_n * (n - obs.normal).norm_squared();
    }
    sum / data.len() as f64
}
