use nalgebra::{DVector, Vector3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::energy::Observation;
use crate::kinematics::PoseModel;
use crate::mesh::SurfaceCoordinate;
use crate::surfaces::{eval_point, SurfaceKind};

/// How observations are drawn from the posed model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub count: usize,
    /// Upper end of the per-component noise range.
    pub noise: f64,
    /// Draw noise from `[-noise, noise]` instead of `[0, noise]`.
    #[serde(default)]
    pub symmetric_noise: bool,
    /// Only sample patches whose posed face normal points towards +z.
    #[serde(default)]
    pub visible_only: bool,
}

/// Observations and the coordinates they were drawn from.
#[derive(Debug, Clone)]
pub struct Sample {
    pub observations: Vec<Observation>,
    pub coordinates: Vec<SurfaceCoordinate>,
}

/// Uniform point on the unit triangle.
pub fn uniform_barycentric<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    if a + b > 1.0 {
        (1.0 - a, 1.0 - b)
    } else {
        (a, b)
    }
}

fn noise_vector<R: Rng + ?Sized>(rng: &mut R, spec: &SamplingSpec) -> Vector3<f64> {
    if spec.noise == 0.0 {
        return Vector3::zeros();
    }
    let lo = if spec.symmetric_noise { -spec.noise } else { 0.0 };
    Vector3::from_fn(|_, _| rng.random_range(lo..=spec.noise))
}

/// Patches eligible for sampling and their posed areas.
pub fn sampling_weights(model: &dyn PoseModel, theta: &DVector<f64>, visible_only: bool) -> Result<Vec<f64>, BenchError> {
    let posed = model.pose(theta, false)?;
    Ok((0..model.mesh().triangle_count())
        .map(|t| {
            let f = posed.face_normal(t);
            if visible_only && !(f.z > 0.0) {
                0.0
            } else {
                0.5 * f.norm()
            }
        })
        .collect())
}

/// Draws observations from the Phong surface of `model` at `theta`.
///
/// Patches are chosen proportionally to posed area, positions uniformly
/// inside the patch. Noise is added per component to points and normals;
/// normals are renormalized afterwards.
pub fn sample_observations<R: Rng + ?Sized>(
    model: &dyn PoseModel,
    theta: &DVector<f64>,
    spec: &SamplingSpec,
    rng: &mut R,
) -> Result<Sample, BenchError> {
    if spec.count == 0 {
        return Err(BenchError::Config("observation count must be at least 1".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(BenchError::Config(format!("noise must be finite and nonnegative, got {}", spec.noise)));
    }
    let weights = sampling_weights(model, theta, spec.visible_only)?;
    let pick = WeightedIndex::new(&weights).map_err(|_| BenchError::NoVisiblePatches)?;
    let posed = model.pose(theta, false)?;

    let mut observations = Vec::with_capacity(spec.count);
    let mut coordinates = Vec::with_capacity(spec.count);
    while observations.len() < spec.count {
        let patch = pick.sample(rng);
        let (v, w) = uniform_barycentric(rng);
        let u = SurfaceCoordinate { patch, v, w };
        let e = eval_point(&posed, SurfaceKind::Phong, &u)?;
        let point = e.position + noise_vector(rng, spec);
        let normal = e.normal + noise_vector(rng, spec);
        let len = normal.norm();
        // Symmetric noise can cancel a normal; redraw in that case.
        if !(len > 1e-9) {
            continue;
        }
        observations.push(Observation {
            point,
            normal: normal / len,
        });
        coordinates.push(u);
    }
    Ok(Sample {
        observations,
        coordinates,
    })
}
