//! Fit the three-bone chain from a perturbed start.
//!
//! ```text
//! cargo run --release --example articulated_fit -- [trials]
//! ```

use phong_fit::bench::{run_chain_study, ChainStudyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: usize = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let config = ChainStudyConfig {
        seed: 2024,
        trials,
        ..ChainStudyConfig::default()
    };
    let result = run_chain_study(&config)?;
    for t in &result.trials {
        println!(
            "trial {:>3}: energy {:.3e} -> {:.3e} ({:>8.1e}x) in {:>2} iterations",
            t.trial, t.initial_energy, t.final_energy, t.reduction, t.iterations
        );
    }
    println!("{:.0}% of trials cut the energy by 10x", 100.0 * result.fraction_reduced(10.0));
    Ok(())
}
