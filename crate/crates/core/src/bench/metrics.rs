use nalgebra::{DVector, Vector3};
use serde::Serialize;

use crate::rotation::rotation_matrix;

fn rotation_of(theta: &DVector<f64>) -> nalgebra::Matrix3<f64> {
    rotation_matrix(&Vector3::new(theta[3], theta[4], theta[5]))
}

/// Rotation error in degrees, symmetric under flipping the x axis.
///
/// The angle between `R_fit s e_x` and `R_gt e_x`, minimized over `s = +-1`.
pub fn rotation_error(theta_fit: &DVector<f64>, theta_gt: &DVector<f64>) -> f64 {
    let a = rotation_of(theta_fit) * Vector3::x();
    let b = rotation_of(theta_gt) * Vector3::x();
    // atan2 keeps full precision near 0 and 180 degrees.
    let angle = a.cross(&b).norm().atan2(a.dot(&b));
    let angle = angle.min(std::f64::consts::PI - angle);
    angle.to_degrees()
}

/// Mean, sample standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub stdev: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                stdev: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stdev = if n > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            count: n,
            mean,
            stdev,
            stderr: stdev / (n as f64).sqrt(),
        }
    }
}

/// Uniform bins over `[-180, 180)` degrees.
pub fn angle_bin(angle_deg: f64, bins: usize) -> usize {
    let t = (angle_deg + 180.0) / 360.0;
    ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// First iteration whose mean error is below `threshold`.
pub fn iterations_to_reach(mean_errors: &[f64], threshold: f64) -> Option<usize> {
    mean_errors.iter().position(|&e| e < threshold)
}
