//! Rigid ellipsoid study: lifted Phong against lifted tri-mesh and ICP.
//!
//! ```text
//! cargo run --release --example ellipsoid_study -- [trials] [ellipsoid-320|ellipsoid-1280] [phong|loop-limit] [out-dir]
//! ```

use std::path::PathBuf;

use phong_fit::bench::{iterations_to_reach, run_study, write_study, ArmSpec, ModelId, StudyConfig};
use phong_fit::energy::Optimizer;
use phong_fit::surfaces::SurfaceKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    let model: ModelId = args.next().map_or(Ok(ModelId::Ellipsoid320), |s| s.parse())?;
    let surface = args.next().unwrap_or_else(|| "phong".into());
    let out = args.next().map(PathBuf::from);

    let arms = vec![
        ArmSpec::new(SurfaceKind::Phong, Optimizer::Lifted, 1.0),
        ArmSpec::new(SurfaceKind::Phong, Optimizer::Lifted, 0.0),
        ArmSpec::new(SurfaceKind::TriMesh, Optimizer::Lifted, 0.05),
        ArmSpec::new(SurfaceKind::TriMesh, Optimizer::Lifted, 0.0),
        ArmSpec::new(SurfaceKind::Phong, Optimizer::Icp, 1.0),
    ];
    let mut config = StudyConfig::new(2024, trials, arms);
    config.models = vec![model];
    config.sampling_surface = serde_json::from_value(serde_json::Value::String(surface))?;
    let result = run_study(&config)?;

    println!("{model}, {trials} trials, {:.1} s", result.wall_seconds);
    println!("{:<24} {:>10} {:>10} {:>14}", "arm", "err@10", "err@50", "iters to <10");
    for arm in &result.arms {
        let means = arm.mean_errors();
        let reach = iterations_to_reach(&means, 10.0).map_or("-".to_string(), |k| k.to_string());
        println!("{:<24} {:>10.3} {:>10.3} {:>14}", arm.label(), means[10], means[50], reach);
    }
    if let Some(dir) = out {
        for p in write_study(&result, &dir)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
