//! Frequentist coverage of 95% credible intervals for <f, phi_j> over
//! independent data sets.

use srcid::harness::{run_coverage, ExperimentConfig, Setup};

fn main() -> srcid::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::from_path(p.as_ref())?,
        None => ExperimentConfig { sample_sizes: vec![1000], ..ExperimentConfig::standard() },
    };
    let setup = Setup::new(config)?;
    for row in run_coverage(&setup)? {
        println!(
            "n={} j={:<2} coverage {:.3} over {} replications (radius {:.2e})",
            row.n, row.j, row.coverage, row.replications, row.radius
        );
    }
    Ok(())
}
