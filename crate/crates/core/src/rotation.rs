//! Axis-angle rotations and their derivatives.
//!
//! Rotations are parameterized by a 3-vector `r` whose direction is the
//! rotation axis and whose norm is the angle in radians. Small angles use a
//! Taylor branch so both the rotation and its Jacobian stay smooth through 0.

use nalgebra::{Matrix3, Vector3};

/// Below this angle the trigonometric coefficients switch to their series.
pub const TAYLOR_THRESHOLD: f64 = 1e-4;

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
#[inline]
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Coefficients `(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)` for `t = |r|`.
#[inline]
fn coefficients(r: &Vector3<f64>) -> (f64, f64, f64) {
    let t2 = r.norm_squared();
    let t = t2.sqrt();
    if t < TAYLOR_THRESHOLD {
        (
            1.0 - t2 / 6.0,
            0.5 - t2 / 24.0,
            1.0 / 6.0 - t2 / 120.0,
        )
    } else {
        let (s, c) = t.sin_cos();
        (s / t, (1.0 - c) / t2, (t - s) / (t2 * t))
    }
}

/// Rodrigues' formula.
pub fn rotation_matrix(r: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b, _) = coefficients(r);
    let k = skew(r);
    Matrix3::identity() + k * a + k * k * b
}

/// Right Jacobian of SO(3): `R(r + d) ~= R(r) * exp(skew(J_r(r) d))`.
pub fn right_jacobian(r: &Vector3<f64>) -> Matrix3<f64> {
    let (_, b, c) = coefficients(r);
    let k = skew(r);
    Matrix3::identity() - k * b + k * k * c
}

/// Rotation matrix together with its right Jacobian.
#[derive(Debug, Clone, Copy)]
pub struct RotationWithJacobian {
    pub rotation: Matrix3<f64>,
    pub right_jacobian: Matrix3<f64>,
}

impl RotationWithJacobian {
    pub fn new(r: &Vector3<f64>) -> Self {
        let (a, b, c) = coefficients(r);
        let k = skew(r);
        let k2 = k * k;
        Self {
            rotation: Matrix3::identity() + k * a + k2 * b,
            right_jacobian: Matrix3::identity() - k * b + k2 * c,
        }
    }

    /// `d(R x) / dr` for a fixed vector `x`.
    #[inline]
    pub fn d_rotate(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        -self.rotation * skew(x) * self.right_jacobian
    }
}

/// Axis-angle vector of a rotation matrix (angle in `[0, pi]`).
pub fn log_map(rotation: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let w = Vector3::new(
        rotation[(2, 1)] - rotation[(1, 2)],
        rotation[(0, 2)] - rotation[(2, 0)],
        rotation[(1, 0)] - rotation[(0, 1)],
    );
    if angle < 1e-6 {
        return w * 0.5;
    }
    if std::f64::consts::PI - angle < 1e-6 {
        // Near pi the antisymmetric part vanishes; read the axis off R + I.
        let m = rotation + Matrix3::identity();
        let col = (0..3)
            .max_by(|&i, &j| m.column(i).norm().total_cmp(&m.column(j).norm()))
            .unwrap_or(0);
        let axis = m.column(col).normalize();
        return axis * angle;
    }
    w * (angle / (2.0 * angle.sin()))
}
