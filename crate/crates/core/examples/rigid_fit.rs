//! One rigid fit of the ellipsoid, lifted against ICP.
//!
//! ```text
//! cargo run --release --example rigid_fit -- [angle-deg] [seed]
//! ```

use nalgebra::DVector;
use phong_fit::bench::{rotation_error, sample_observations, BenchModel, ModelId, SamplingSpec};
use phong_fit::energy::{FitConfig, Optimizer};
use phong_fit::solvers::run_fit;
use phong_fit::surfaces::SurfaceKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let angle: f64 = args.next().map_or(Ok(60.0), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse())?;

    let model = BenchModel::build(ModelId::Ellipsoid320)?;
    let y = angle.to_radians();
    let truth = DVector::from_vec(vec![0.0, 0.0, 0.0, y, y, y]);
    let spec = SamplingSpec {
        count: 200,
        noise: 0.1,
        symmetric_noise: false,
        visible_only: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = sample_observations(model.as_model(), &truth, &spec, &mut rng)?.observations;

    for (surface, optimizer, lambda_n) in [
        (SurfaceKind::Phong, Optimizer::Lifted, 1.0),
        (SurfaceKind::TriMesh, Optimizer::Lifted, 0.05),
        (SurfaceKind::Phong, Optimizer::Icp, 1.0),
    ] {
        let config = FitConfig {
            surface,
            optimizer,
            lambda_n,
            max_iterations: 50,
            ..FitConfig::default()
        };
        let report = run_fit(model.as_model(), &data, &model.neutral(), &config)?;
        let errors: Vec<f64> = report.theta_trace.iter().map(|t| rotation_error(t, &truth)).collect();
        let at = |k: usize| errors[k.min(errors.len() - 1)];
        println!(
            "{optimizer:?} {surface:?} lambda {lambda_n}: err@0 {:.2}  @5 {:.2}  @10 {:.2}  final {:.3} deg after {} iterations",
            at(0),
            at(5),
            at(10),
            errors.last().unwrap(),
            report.iterations
        );
    }
    Ok(())
}
