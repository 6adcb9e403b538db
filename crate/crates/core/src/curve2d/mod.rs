//! Rigid alignment of a closed planar curve to 2D points, with three update
//! rules side by side: point-to-tangent-line ICP, its regularized form and
//! the lifted joint update over pose and curve parameters.
//!
//! Curve parameters live in `[0, 1)` and wrap around.

mod solve;

pub use solve::{
    closest_parameters, fit_icp2d, fit_lifted2d, lifted2d_dense, lifted2d_energy, lifted2d_gradient, lifted2d_step,
    p2p_step, p2pl_energy, p2pl_residuals, p2pl_step_regularized, p2pl_step_unconstrained, regularized_gamma,
    write_traces, Curve2dError, Method2d, TracePoint,
};

use nalgebra::{Matrix2, Vector2, Vector3};

/// Segment count used by [`Curve2D::sampled_ellipse`].
pub const DEFAULT_SEGMENTS: usize = 512;

/// Coarse samples used to bracket the closest point on an ellipse.
const ELLIPSE_BRACKET_SAMPLES: usize = 256;

/// Translation `(x, y)` and rotation angle `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose2D {
    pub translation: Vector2<f64>,
    pub angle: f64,
}

impl RigidPose2D {
    pub fn new(x: f64, y: f64, angle: f64) -> Self {
        Self {
            translation: Vector2::new(x, y),
            angle,
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn from_vector(p: &Vector3<f64>) -> Self {
        Self::new(p.x, p.y, p.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.translation.x, self.translation.y, self.angle)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.angle.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.rotation() * p + self.translation
    }

    /// Maps a world point into the curve's rest frame.
    pub fn inverse_apply(&self, x: &Vector2<f64>) -> Vector2<f64> {
        self.rotation().transpose() * (x - self.translation)
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite()) && self.angle.is_finite()
    }
}

/// Quarter turn, `perp(v) = J v`.
pub(crate) fn perp(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// A closed curve `c(t)` in its rest frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve2D {
    /// Arc-length parameterized closed polyline; the last vertex joins the first.
    Polyline {
        points: Vec<Vector2<f64>>,
        /// Normalized arc length at each vertex, starting at 0.
        knots: Vec<f64>,
        length: f64,
    },
    /// `(a cos 2 pi t, b sin 2 pi t)`.
    Ellipse { a: f64, b: f64 },
}

impl Curve2D {
    pub fn polyline(points: Vec<Vector2<f64>>) -> Result<Self, Curve2dError> {
        if points.len() < 3 {
            return Err(Curve2dError::Curve("a closed polyline needs at least 3 vertices".into()));
        }
        let n = points.len();
        let mut knots = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            knots.push(acc);
            let seg = (points[(i + 1) % n] - points[i]).norm();
            if !(seg > 0.0 && seg.is_finite()) {
                return Err(Curve2dError::Curve(format!("segment {i} is degenerate")));
            }
            acc += seg;
        }
        for k in &mut knots {
            *k /= acc;
        }
        Ok(Curve2D::Polyline {
            points,
            knots,
            length: acc,
        })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self, Curve2dError> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Curve2dError::Curve(format!("ellipse radii must be positive, got {a}, {b}")));
        }
        Ok(Curve2D::Ellipse { a, b })
    }

    /// Polyline through `segments` points of an ellipse, equally spaced in angle.
    pub fn sampled_ellipse(a: f64, b: f64, segments: usize) -> Result<Self, Curve2dError> {
        Self::ellipse(a, b)?;
        let points = (0..segments)
            .map(|k| {
                let s = std::f64::consts::TAU * k as f64 / segments as f64;
                Vector2::new(a * s.cos(), b * s.sin())
            })
            .collect();
        Self::polyline(points)
    }

    /// Segment index and local fraction for a wrapped parameter.
    fn locate(knots: &[f64], t: f64) -> (usize, f64) {
        let n = knots.len();
        let i = knots.partition_point(|&k| k <= t).saturating_sub(1).min(n - 1);
        let end = if i + 1 < n { knots[i + 1] } else { 1.0 };
        (i, (t - knots[i]) / (end - knots[i]))
    }

    pub fn point(&self, t: f64) -> Vector2<f64> {
        let t = wrap(t);
        match self {
            Curve2D::Polyline { points, knots, .. } => {
                let (i, f) = Self::locate(knots, t);
                let n = points.len();
                points[i] * (1.0 - f) + points[(i + 1) % n] * f
            }
            Curve2D::Ellipse { a, b } => {
                let s = std::f64::consts::TAU * t;
                Vector2::new(a * s.cos(), b * s.sin())
            }
        }
    }

    /// `dc/dt`.
    pub fn derivative(&self, t: f64) -> Vector2<f64> {
        let t = wrap(t);
        match self {
            Curve2D::Polyline { points, knots, length } => {
                let (i, _) = Self::locate(knots, t);
                let n = points.len();
                let seg = points[(i + 1) % n] - points[i];
                seg * (*length / seg.norm())
            }
            Curve2D::Ellipse { a, b } => {
                let s = std::f64::consts::TAU * t;
                Vector2::new(-a * s.sin(), b * s.cos()) * std::f64::consts::TAU
            }
        }
    }

    /// `d^2c/dt^2`; zero on polyline segments.
    pub fn second_derivative(&self, t: f64) -> Vector2<f64> {
        match self {
            Curve2D::Polyline { .. } => Vector2::zeros(),
            Curve2D::Ellipse { a, b } => {
                let s = std::f64::consts::TAU * wrap(t);
                let w2 = std::f64::consts::TAU * std::f64::consts::TAU;
                Vector2::new(-a * s.cos(), -b * s.sin()) * w2
            }
        }
    }

    /// Unit tangent.
    pub fn tangent(&self, t: f64) -> Vector2<f64> {
        self.derivative(t).normalize()
    }

    /// Rest-frame parameter of the closest curve point to `y`.
    pub fn closest_parameter(&self, y: &Vector2<f64>) -> f64 {
        match self {
            Curve2D::Polyline { points, knots, .. } => {
                let n = points.len();
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..n {
                    let a = points[i];
                    let e = points[(i + 1) % n] - a;
                    let f = ((y - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                    let d = (a + e * f - y).norm_squared();
                    if d < best.0 {
                        let end = if i + 1 < n { knots[i + 1] } else { 1.0 };
                        best = (d, knots[i] + f * (end - knots[i]));
                    }
                }
                wrap(best.1)
            }
            Curve2D::Ellipse { .. } => self.closest_on_ellipse(y),
        }
    }

    fn closest_on_ellipse(&self, y: &Vector2<f64>) -> f64 {
        let f = |t: f64| (self.point(t) - y).norm_squared();
        let h = 1.0 / ELLIPSE_BRACKET_SAMPLES as f64;
        let k = (0..ELLIPSE_BRACKET_SAMPLES)
            .min_by(|&i, &j| f(i as f64 * h).total_cmp(&f(j as f64 * h)))
            .unwrap_or(0);
        // Golden section on the neighbouring interval, then Newton polish on
        // the stationarity condition c'(t) . (c(t) - y) = 0.
        let (mut lo, mut hi) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..60 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..3 {
            let r = self.point(t) - y;
            let d1 = self.derivative(t);
            let grad = d1.dot(&r);
            let hess = d1.norm_squared() + self.second_derivative(t).dot(&r);
            if hess <= 0.0 {
                break;
            }
            let next = t - grad / hess;
            if f(next) > f(t) {
                break;
            }
            t = next;
        }
        wrap(t)
    }
}

/// Wraps a parameter into `[0, 1)`.
pub fn wrap(t: f64) -> f64 {
    let w = t.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}
