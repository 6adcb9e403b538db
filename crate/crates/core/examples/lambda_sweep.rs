//! Sweep the normal weight for both surfaces and report the best.
//!
//! ```text
//! cargo run --release --example lambda_sweep -- [trials] [out-dir]
//! ```

use std::path::PathBuf;

use phong_fit::bench::{run_sweep, write_sweep, SweepConfig};
use phong_fit::surfaces::SurfaceKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().map_or(Ok(40), |s| s.parse())?;
    let out = args.next().map(PathBuf::from);

    let config = SweepConfig {
        seed: 2024,
        trials,
        ..SweepConfig::default()
    };
    let result = run_sweep(&config)?;
    for p in &result.points {
        println!("{:?} {:>5.2}  {:>8.3} +- {:.3} deg", p.surface, p.lambda_n, p.mean_error_deg, p.stderr);
    }
    for s in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
        if let Some(b) = result.best(s) {
            println!("best for {s:?}: lambda_n = {:.2}", b.lambda_n);
        }
    }
    if let Some(dir) = out {
        for p in write_sweep(&result, &dir)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
