//! Posterior mean with the noise level replaced by the difference-based
//! estimate, compared with the known-sigma analysis of the same data.

use srcid::harness::{run_empirical_bayes, ExperimentConfig, Setup};

fn main() -> srcid::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::from_path(p.as_ref())?,
        None => ExperimentConfig {
            sigma_known: false,
            sample_sizes: vec![1000, 2000, 3000, 4500],
            ..ExperimentConfig::standard()
        },
    };
    let setup = Setup::new(config)?;
    for row in run_empirical_bayes(&setup)? {
        println!(
            "n={:>4} sigma_hat {:.5} error {:.4} ({:.1}%), known sigma {:.4}",
            row.n,
            row.sigma_hat,
            row.error,
            100.0 * row.rel_error,
            row.known_sigma_error
        );
    }
    Ok(())
}
