//! Time a million surface evaluations, Phong against flat.
//!
//! ```text
//! cargo run --release --example timing_probe -- [count]
//! ```

use phong_fit::bench::timing_probe;
use phong_fit::surfaces::SurfaceKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args().nth(1).map_or(Ok(1_000_000), |s| s.parse())?;
    let phong = timing_probe(SurfaceKind::Phong, count)?;
    let flat = timing_probe(SurfaceKind::TriMesh, count)?;
    for r in [&phong, &flat] {
        println!(
            "{:<8?} eval {:.4} s ({} flops)   with d/du {:.4} s ({} flops)",
            r.surface, r.eval_seconds, r.flops_per_eval, r.derivative_seconds, r.flops_per_derivative_eval
        );
    }
    println!(
        "phong / flat: eval {:.2}, with d/du {:.2}",
        phong.eval_seconds / flat.eval_seconds,
        phong.derivative_seconds / flat.derivative_seconds
    );
    Ok(())
}
