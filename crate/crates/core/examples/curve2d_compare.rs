//! ICP variants against the lifted update on a 2D ellipse, with CSV traces.
//!
//! ```text
//! cargo run --example curve2d_compare -- [angle-deg] [out.csv]
//! ```

use std::path::PathBuf;

use nalgebra::Vector2;
use phong_fit::curve2d::{fit_icp2d, fit_lifted2d, write_traces, Curve2D, Method2d, RigidPose2D};
use phong_fit::energy::Damping;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let angle: f64 = args.next().map_or(Ok(30.0), |s| s.parse())?;
    let out = args.next().map_or_else(|| PathBuf::from("curve2d_traces.csv"), PathBuf::from);

    let curve = Curve2D::ellipse(2.0, 1.0)?;
    let truth = RigidPose2D::new(0.3, -0.2, angle.to_radians());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data: Vec<Vector2<f64>> = (0..40)
        .map(|_| {
            let e = Vector2::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
            truth.apply(&curve.point(rng.random())) + e
        })
        .collect();

    let start = RigidPose2D::identity();
    let mut traces = Vec::new();
    for method in [Method2d::PointToPoint, Method2d::PointToLine, Method2d::Regularized(1.0)] {
        traces.push(fit_icp2d(&curve, &data, start, method, 40)?.1);
    }
    traces.push(fit_lifted2d(&curve, &data, start, 40, Damping::default())?.2);

    for trace in &traces {
        let last = trace.last().unwrap();
        let reach = trace.iter().position(|p| p.rms_distance < 0.01).map_or("-".into(), |k| k.to_string());
        println!(
            "{:<14} final rms {:.5}  angle {:>7.3} deg  rms < 0.01 at iteration {reach}",
            trace[0].method,
            last.rms_distance,
            last.angle.to_degrees()
        );
    }
    write_traces(&out, &traces)?;
    println!("wrote {}", out.display());
    Ok(())
}
