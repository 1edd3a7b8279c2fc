//! Spread of the plug-in estimates <f_n, phi_j> against the asymptotic
//! standard deviation |div(c grad phi_j)| sigma / sqrt(n).

use srcid::harness::{run_clt, ExperimentConfig, Setup};

fn main() -> srcid::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::from_path(p.as_ref())?,
        None => ExperimentConfig { sample_sizes: vec![1000], ..ExperimentConfig::standard() },
    };
    let setup = Setup::new(config)?;
    let res = run_clt(&setup)?;
    for s in &res.summaries {
        let ratio = s.std / s.predicted_std;
        println!(
            "j={:<2} truth {:+.5} mean {:+.5} std {:.3e} predicted {:.3e} ratio {:.3} (area-scaled {:.3})",
            s.j,
            s.truth,
            s.mean,
            s.std,
            s.predicted_std,
            ratio,
            ratio / s.domain_area.sqrt()
        );
    }
    Ok(())
}
