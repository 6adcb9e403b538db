//! Update rules and drivers for 2D rigid curve alignment.
//!
//! With `d_i = x_i - C(t_i, theta)` and the posed unit tangent `tau_i`, the
//! regularized point-to-line objective minimizes over `gamma_i` in closed
//! form, `gamma_i = tau_i . d_i / (1 + lambda)`, leaving
//!
//! ```text
//! (n_i . d_i)^2 + lambda / (1 + lambda) * (tau_i . d_i)^2
//! ```
//!
//! per datum. `lambda = 0` is plain point-to-line ICP and `lambda -> inf` is
//! point-to-point. The ICP updates take one Gauss-Newton step with the
//! tangent frame frozen at the current pose. The lifted update takes one
//! damped step jointly in the pose and every `t_i`.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector2, Vector3};
use serde::Serialize;
use thiserror::Error;

use super::{perp, wrap, Curve2D, RigidPose2D};
use crate::energy::Damping;

/// Smallest accepted eigenvalue ratio of the pose normal matrix.
const RANK_TOLERANCE: f64 = 1e-12;
const MIN_DAMPING: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum Curve2dError {
    #[error("curve: {0}")]
    Curve(String),
    #[error("no data points")]
    Empty,
    #[error("{data} data points but {params} curve parameters")]
    CountMismatch { data: usize, params: usize },
    #[error("data point {0} is not finite")]
    NonFinite(usize),
    #[error("regularizer must be finite and nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("pose normal matrix is rank deficient (tangent lines do not constrain the pose)")]
    RankDeficient,
    #[error("joint system is singular")]
    Singular,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check(data: &[Vector2<f64>], t: &[f64]) -> Result<(), Curve2dError> {
    if data.is_empty() {
        return Err(Curve2dError::Empty);
    }
    if data.len() != t.len() {
        return Err(Curve2dError::CountMismatch {
            data: data.len(),
            params: t.len(),
        });
    }
    if let Some(i) = data.iter().position(|x| !x.iter().all(|v| v.is_finite())) {
        return Err(Curve2dError::NonFinite(i));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<(), Curve2dError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Curve2dError::NegativeLambda(lambda))
    }
}

/// Closest-point correspondences on the posed curve.
pub fn closest_parameters(curve: &Curve2D, pose: &RigidPose2D, data: &[Vector2<f64>]) -> Vec<f64> {
    data.iter().map(|x| curve.closest_parameter(&pose.inverse_apply(x))).collect()
}

/// Posed point, posed unit tangent and `d = x - C`.
struct Local {
    rc: Vector2<f64>,
    tau: Vector2<f64>,
    d: Vector2<f64>,
}

fn local(curve: &Curve2D, pose: &RigidPose2D, x: &Vector2<f64>, t: f64) -> Local {
    let r = pose.rotation();
    let rc = r * curve.point(t);
    Local {
        rc,
        tau: r * curve.tangent(t),
        d: x - rc - pose.translation,
    }
}

/// Signed point-to-tangent-line distances `n_i . d_i`.
pub fn p2pl_residuals(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
) -> Result<Vec<f64>, Curve2dError> {
    check(data, t)?;
    Ok(data
        .iter()
        .zip(t)
        .map(|(x, &ti)| {
            let l = local(curve, pose, x, ti);
            perp(&l.tau).dot(&l.d)
        })
        .collect())
}

/// The minimizing tangent offset for one datum.
pub fn regularized_gamma(
    curve: &Curve2D,
    pose: &RigidPose2D,
    x: &Vector2<f64>,
    t: f64,
    lambda: f64,
) -> Result<f64, Curve2dError> {
    check_lambda(lambda)?;
    let l = local(curve, pose, x, t);
    Ok(l.tau.dot(&l.d) / (1.0 + lambda))
}

/// Regularized point-to-line objective with `gamma` eliminated.
pub fn p2pl_energy(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
    lambda: f64,
) -> Result<f64, Curve2dError> {
    check(data, t)?;
    check_lambda(lambda)?;
    Ok(data
        .iter()
        .zip(t)
        .map(|(x, &ti)| {
            let l = local(curve, pose, x, ti);
            let s = l.tau.dot(&l.d);
            perp(&l.tau).dot(&l.d).powi(2) + lambda / (1.0 + lambda) * s * s
        })
        .sum())
}

/// Accumulates rows `w . d(theta)` with `w` frozen into the pose normal equations.
#[derive(Default)]
struct PoseNormal {
    a: Matrix3<f64>,
    g: Vector3<f64>,
}

impl PoseNormal {
    fn add(&mut self, w: &Vector2<f64>, l: &Local) {
        // d(d)/d(translation) = -I, d(d)/d(angle) = -J R c.
        let jrc = perp(&l.rc);
        let row = Vector3::new(-w.x, -w.y, -w.dot(&jrc));
        self.a += row * row.transpose();
        self.g += row * w.dot(&l.d);
    }

    fn solve(&self, pose: &RigidPose2D) -> Result<RigidPose2D, Curve2dError> {
        let eig = SymmetricEigen::new(self.a);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || min <= RANK_TOLERANCE * max {
            return Err(Curve2dError::RankDeficient);
        }
        let delta = self.a.cholesky().ok_or(Curve2dError::RankDeficient)?.solve(&(-self.g));
        Ok(RigidPose2D::from_vector(&(pose.to_vector() + delta)))
    }
}

/// One point-to-tangent-line Gauss-Newton update.
pub fn p2pl_step_unconstrained(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
) -> Result<RigidPose2D, Curve2dError> {
    check(data, t)?;
    let mut ne = PoseNormal::default();
    for (x, &ti) in data.iter().zip(t) {
        let l = local(curve, pose, x, ti);
        ne.add(&perp(&l.tau), &l);
    }
    ne.solve(pose)
}

/// One regularized point-to-tangent-line update.
pub fn p2pl_step_regularized(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
    lambda: f64,
) -> Result<RigidPose2D, Curve2dError> {
    check(data, t)?;
    check_lambda(lambda)?;
    let k = (lambda / (1.0 + lambda)).sqrt();
    let mut ne = PoseNormal::default();
    for (x, &ti) in data.iter().zip(t) {
        let l = local(curve, pose, x, ti);
        ne.add(&perp(&l.tau), &l);
        ne.add(&(l.tau * k), &l);
    }
    ne.solve(pose)
}

/// One point-to-point Gauss-Newton update with fixed correspondences.
pub fn p2p_step(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
) -> Result<RigidPose2D, Curve2dError> {
    check(data, t)?;
    let mut ne = PoseNormal::default();
    for (x, &ti) in data.iter().zip(t) {
        let l = local(curve, pose, x, ti);
        ne.add(&Vector2::x(), &l);
        ne.add(&Vector2::y(), &l);
    }
    ne.solve(pose)
}

/// `sum_i |x_i - C(t_i, theta)|^2`.
pub fn lifted2d_energy(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
) -> Result<f64, Curve2dError> {
    check(data, t)?;
    Ok(data.iter().zip(t).map(|(x, &ti)| local(curve, pose, x, ti).d.norm_squared()).sum())
}

/// Per-datum Jacobian blocks of `d_i`: three pose columns and one `t_i` column.
fn lifted_blocks(curve: &Curve2D, pose: &RigidPose2D, x: &Vector2<f64>, t: f64) -> (Vector2<f64>, [Vector2<f64>; 3], Vector2<f64>) {
    let l = local(curve, pose, x, t);
    let jrc = perp(&l.rc);
    let jt = -(pose.rotation() * curve.derivative(t));
    (l.d, [-Vector2::x(), -Vector2::y(), -jrc], jt)
}

/// Gradient of [`lifted2d_energy`] in the pose and each parameter.
pub fn lifted2d_gradient(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
) -> Result<(Vector3<f64>, Vec<f64>), Curve2dError> {
    check(data, t)?;
    let mut g = Vector3::zeros();
    let mut gt = Vec::with_capacity(t.len());
    for (x, &ti) in data.iter().zip(t) {
        let (d, jp, jt) = lifted_blocks(curve, pose, x, ti);
        for k in 0..3 {
            g[k] += 2.0 * jp[k].dot(&d);
        }
        gt.push(2.0 * jt.dot(&d));
    }
    Ok((g, gt))
}

fn apply_step(pose: &RigidPose2D, t: &[f64], dp: &Vector3<f64>, dt: &[f64]) -> (RigidPose2D, Vec<f64>) {
    let pose = RigidPose2D::from_vector(&(pose.to_vector() + dp));
    let t = t.iter().zip(dt).map(|(ti, d)| wrap(ti + d)).collect();
    (pose, t)
}

/// One damped joint step in the pose and every `t_i`, eliminating the
/// scalar `t` blocks by Schur complement.
pub fn lifted2d_step(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
    damping: f64,
) -> Result<(RigidPose2D, Vec<f64>), Curve2dError> {
    check(data, t)?;
    let mut reduced = Matrix3::identity() * damping;
    let mut rhs = Vector3::zeros();
    let mut blocks = Vec::with_capacity(t.len());
    for (x, &ti) in data.iter().zip(t) {
        let (d, jp, jt) = lifted_blocks(curve, pose, x, ti);
        let row = |v: &Vector2<f64>| Vector3::new(jp[0].dot(v), jp[1].dot(v), jp[2].dot(v));
        let a = jt.norm_squared() + damping;
        if !(a > 0.0) {
            return Err(Curve2dError::Singular);
        }
        let b = row(&jt);
        let gt = jt.dot(&d);
        for r in 0..2 {
            let jr = Vector3::new(jp[0][r], jp[1][r], jp[2][r]);
            reduced += jr * jr.transpose();
        }
        reduced -= b * b.transpose() / a;
        rhs += row(&d) - b * (gt / a);
        blocks.push((a, b, gt));
    }
    let dp = reduced.cholesky().ok_or(Curve2dError::Singular)?.solve(&(-rhs));
    let dt: Vec<f64> = blocks.iter().map(|(a, b, gt)| -(gt + b.dot(&dp)) / a).collect();
    Ok(apply_step(pose, t, &dp, &dt))
}

/// The same step from the full `(3 + N)` normal equations.
pub fn lifted2d_dense(
    curve: &Curve2D,
    pose: &RigidPose2D,
    data: &[Vector2<f64>],
    t: &[f64],
    damping: f64,
) -> Result<(RigidPose2D, Vec<f64>), Curve2dError> {
    check(data, t)?;
    let n = t.len();
    let mut j = DMatrix::zeros(2 * n, 3 + n);
    let mut r = DVector::zeros(2 * n);
    for (i, (x, &ti)) in data.iter().zip(t).enumerate() {
        let (d, jp, jt) = lifted_blocks(curve, pose, x, ti);
        for row in 0..2 {
            for k in 0..3 {
                j[(2 * i + row, k)] = jp[k][row];
            }
            j[(2 * i + row, 3 + i)] = jt[row];
            r[2 * i + row] = d[row];
        }
    }
    let a = j.transpose() * &j + DMatrix::identity(3 + n, 3 + n) * damping;
    let delta = a.lu().solve(&(-(j.transpose() * r))).ok_or(Curve2dError::Singular)?;
    let dp = Vector3::new(delta[0], delta[1], delta[2]);
    let dt: Vec<f64> = delta.iter().skip(3).copied().collect();
    Ok(apply_step(pose, t, &dp, &dt))
}

/// Which update a trace follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method2d {
    PointToLine,
    Regularized(f64),
    PointToPoint,
    Lifted,
}

impl Method2d {
    pub fn label(&self) -> String {
        match self {
            Method2d::PointToLine => "p2pl".into(),
            Method2d::Regularized(l) => format!("p2pl-reg-{l}"),
            Method2d::PointToPoint => "p2p".into(),
            Method2d::Lifted => "lifted".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub method: String,
    pub iteration: usize,
    /// The objective the method minimizes, at its own correspondences.
    pub energy: f64,
    /// Root mean square distance from the data to the posed curve.
    pub rms_distance: f64,
    pub tx: f64,
    pub ty: f64,
    pub angle: f64,
}

fn rms_distance(curve: &Curve2D, pose: &RigidPose2D, data: &[Vector2<f64>]) -> f64 {
    let t = closest_parameters(curve, pose, data);
    let sum: f64 = data.iter().zip(&t).map(|(x, &ti)| (x - pose.apply(&curve.point(ti))).norm_squared()).sum();
    (sum / data.len() as f64).sqrt()
}

fn trace_point(method: Method2d, iteration: usize, energy: f64, curve: &Curve2D, pose: &RigidPose2D, data: &[Vector2<f64>]) -> TracePoint {
    TracePoint {
        method: method.label(),
        iteration,
        energy,
        rms_distance: rms_distance(curve, pose, data),
        tx: pose.translation.x,
        ty: pose.translation.y,
        angle: pose.angle,
    }
}

/// ICP: closest points, then one update of the chosen kind, repeated.
/// The trace starts with the initial pose.
pub fn fit_icp2d(
    curve: &Curve2D,
    data: &[Vector2<f64>],
    start: RigidPose2D,
    method: Method2d,
    iterations: usize,
) -> Result<(RigidPose2D, Vec<TracePoint>), Curve2dError> {
    let energy = |pose: &RigidPose2D, t: &[f64]| match method {
        Method2d::PointToLine => p2pl_energy(curve, pose, data, t, 0.0),
        Method2d::Regularized(l) => p2pl_energy(curve, pose, data, t, l),
        Method2d::PointToPoint | Method2d::Lifted => lifted2d_energy(curve, pose, data, t),
    };
    let mut pose = start;
    let t = closest_parameters(curve, &pose, data);
    let mut trace = vec![trace_point(method, 0, energy(&pose, &t)?, curve, &pose, data)];
    for it in 1..=iterations {
        let t = closest_parameters(curve, &pose, data);
        pose = match method {
            Method2d::PointToLine => p2pl_step_unconstrained(curve, &pose, data, &t)?,
            Method2d::Regularized(l) => p2pl_step_regularized(curve, &pose, data, &t, l)?,
            Method2d::PointToPoint => p2p_step(curve, &pose, data, &t)?,
            Method2d::Lifted => return Err(Curve2dError::Curve("use fit_lifted2d for the lifted update".into())),
        };
        let t = closest_parameters(curve, &pose, data);
        trace.push(trace_point(method, it, energy(&pose, &t)?, curve, &pose, data));
    }
    Ok((pose, trace))
}

/// Lifted Levenberg iterations from closest-point correspondences at the
/// start pose; correspondences are never re-matched.
pub fn fit_lifted2d(
    curve: &Curve2D,
    data: &[Vector2<f64>],
    start: RigidPose2D,
    iterations: usize,
    damping: Damping,
) -> Result<(RigidPose2D, Vec<f64>, Vec<TracePoint>), Curve2dError> {
    let mut pose = start;
    let mut t = closest_parameters(curve, &pose, data);
    let mut energy = lifted2d_energy(curve, &pose, data, &t)?;
    let mut mu = damping.initial;
    let mut trace = vec![trace_point(Method2d::Lifted, 0, energy, curve, &pose, data)];
    for it in 1..=iterations {
        for _ in 0..=damping.max_rejects {
            let candidate = lifted2d_step(curve, &pose, data, &t, mu)
                .and_then(|(p, tt)| lifted2d_energy(curve, &p, data, &tt).map(|e| (p, tt, e)));
            match candidate {
                Ok((p, tt, e)) if e <= energy && e.is_finite() => {
                    pose = p;
                    t = tt;
                    energy = e;
                    mu = (mu / damping.decrease).max(MIN_DAMPING);
                    break;
                }
                _ => mu *= damping.increase,
            }
        }
        trace.push(trace_point(Method2d::Lifted, it, energy, curve, &pose, data));
    }
    Ok((pose, t, trace))
}

/// Writes traces as one CSV with a header row.
pub fn write_traces(path: &Path, traces: &[Vec<TracePoint>]) -> Result<(), Curve2dError> {
    let mut w = csv::Writer::from_path(path)?;
    for p in traces.iter().flatten() {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
