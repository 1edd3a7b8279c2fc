//! Relative L2 error of the posterior mean over sample sizes and noise
//! levels. Pass a TOML config path to override the built-in grid.

use srcid::harness::{run_estimation_sweep, ExperimentConfig, Setup};

fn main() -> srcid::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::from_path(p.as_ref())?,
        None => ExperimentConfig { sample_sizes: vec![250, 1000, 4500], ..ExperimentConfig::standard() },
    };
    let setup = Setup::new(config)?;
    println!("|f0| = {:.4}", setup.truth_norm);
    for row in run_estimation_sweep(&setup)? {
        println!("n={:>4} sigma={:<7} error {:.4} relative {:.1}%", row.n, row.sigma, row.error, 100.0 * row.rel_error);
    }
    Ok(())
}
