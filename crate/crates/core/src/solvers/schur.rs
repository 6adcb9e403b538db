//! Damped normal equations for the lifted system.
//!
//! With `J = [J_theta | J_U]` and `J_U` block diagonal, the system
//!
//! ```text
//! (J^T J + lambda I) [dtheta; dU] = -J^T r
//! ```
//!
//! is solved by eliminating each `2 x 2` correspondence block:
//!
//! ```text
//! A   = J_theta^T J_theta + lambda I        B_i = J_theta_i^T J_u_i
//! C_i = J_u_i^T J_u_i + lambda I            g_i = J_u_i^T r_i
//! (A - sum B_i C_i^-1 B_i^T) dtheta = -J_theta^T r + sum B_i C_i^-1 g_i
//! du_i = C_i^-1 (-g_i - B_i^T dtheta)
//! ```

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::Serialize;

use crate::energy::ResidualSystem;

/// Multiplications performed by one solve, split by stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlopCount {
    /// `J_theta^T J_theta` and `J_theta^T r`.
    pub normal_equations: u64,
    /// Forming and inverting `C_i`, `g_i`, `B_i` and folding them into the
    /// reduced system.
    pub elimination: u64,
    /// Cholesky factorization and triangular solves of the `P x P` system.
    pub reduced_solve: u64,
    /// Recovering each `du_i`.
    pub back_substitution: u64,
}

impl FlopCount {
    pub fn total(&self) -> u64 {
        self.normal_equations + self.elimination + self.reduced_solve + self.back_substitution
    }

    /// Work a pose-only solve would not do.
    pub fn lifting_overhead(&self) -> u64 {
        self.elimination + self.back_substitution
    }
}

fn normal_equation_flops(rows: usize, p: usize) -> u64 {
    let (rows, p) = (rows as u64, p as u64);
    rows * p * (p + 1) / 2 + rows * p
}

fn cholesky_flops(p: usize) -> u64 {
    let p = p as u64;
    // Factorization plus forward and backward substitution.
    p * p * p / 6 + p * p + 2 * p
}

/// Result of one lifted solve.
#[derive(Debug, Clone)]
pub struct LiftedSolution {
    pub delta_theta: DVector<f64>,
    pub delta_u: Vec<Vector2<f64>>,
    pub flops: FlopCount,
}

fn symmetric_inverse(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det.abs() > f64::MIN_POSITIVE) || !det.is_finite() {
        return None;
    }
    let s = 1.0 / det;
    Some(Matrix2::new(m[(1, 1)] * s, -m[(0, 1)] * s, -m[(1, 0)] * s, m[(0, 0)] * s))
}

/// Schur-complement solve of the damped lifted system. `None` when a block
/// or the reduced matrix is not positive definite.
pub fn solve_lifted(system: &ResidualSystem, damping: f64) -> Option<LiftedSolution> {
    let p = system.parameter_count();
    let d = system.data_count();
    let jt = &system.j_theta;

    let mut reduced = jt.tr_mul(jt);
    for k in 0..p {
        reduced[(k, k)] += damping;
    }
    let mut rhs = -jt.tr_mul(&system.residuals);

    let mut blocks = Vec::with_capacity(d);
    for i in 0..d {
        let ju = &system.j_u[i];
        let r_i = system.residuals.fixed_rows::<6>(6 * i);
        let jt_i = jt.rows(6 * i, 6);
        let c = ju.tr_mul(ju) + Matrix2::identity() * damping;
        let c_inv = symmetric_inverse(&c)?;
        let g = ju.tr_mul(&r_i);
        let b = jt_i.tr_mul(ju);
        let w = &b * c_inv;
        reduced -= &w * b.transpose();
        rhs += &w * g;
        blocks.push((c_inv, g, b));
    }

    let delta_theta = if p > 0 {
        reduced.cholesky()?.solve(&rhs)
    } else {
        DVector::zeros(0)
    };
    if !delta_theta.iter().all(|x| x.is_finite()) {
        return None;
    }

    let delta_u = blocks
        .iter()
        .map(|(c_inv, g, b)| c_inv * (-g - b.tr_mul(&delta_theta)))
        .collect();

    let pu = p as u64;
    let du = d as u64;
    let flops = FlopCount {
        normal_equations: normal_equation_flops(6 * d, p),
        elimination: du * (18 + 6 + 12 + 12 * pu + 4 * pu + pu * (pu + 1) + 2 * pu),
        reduced_solve: if p > 0 { cholesky_flops(p) } else { 0 },
        back_substitution: du * (2 * pu + 4),
    };
    Some(LiftedSolution {
        delta_theta,
        delta_u,
        flops,
    })
}

/// Damped solve in the pose parameters only, correspondences held fixed.
pub fn solve_theta_only(system: &ResidualSystem, damping: f64) -> Option<(DVector<f64>, FlopCount)> {
    let p = system.parameter_count();
    let jt = &system.j_theta;
    let mut a = jt.tr_mul(jt);
    for k in 0..p {
        a[(k, k)] += damping;
    }
    let rhs = -jt.tr_mul(&system.residuals);
    let delta = a.cholesky()?.solve(&rhs);
    if !delta.iter().all(|x| x.is_finite()) {
        return None;
    }
    let flops = FlopCount {
        normal_equations: normal_equation_flops(6 * system.data_count(), p),
        reduced_solve: cholesky_flops(p),
        ..FlopCount::default()
    };
    Some((delta, flops))
}

/// Dense solve of the full `(P + 2D)` damped system. Reference only.
pub fn solve_dense(system: &ResidualSystem, damping: f64) -> Option<(DVector<f64>, Vec<Vector2<f64>>)> {
    let p = system.parameter_count();
    let d = system.data_count();
    let n = p + 2 * d;
    let mut j = DMatrix::zeros(6 * d, n);
    j.view_mut((0, 0), (6 * d, p)).copy_from(&system.j_theta);
    for i in 0..d {
        j.view_mut((6 * i, p + 2 * i), (6, 2)).copy_from(&system.j_u[i]);
    }
    let mut h = j.tr_mul(&j);
    for k in 0..n {
        h[(k, k)] += damping;
    }
    let x = h.lu().solve(&(-j.tr_mul(&system.residuals)))?;
    let dt = x.rows(0, p).into_owned();
    let du = (0..d).map(|i| Vector2::new(x[p + 2 * i], x[p + 2 * i + 1])).collect();
    Some((dt, du))
}
