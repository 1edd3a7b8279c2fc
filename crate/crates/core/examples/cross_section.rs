//! Truth, posterior mean and posterior draws along a horizontal line,
//! written as CSV to the config's output directory.

use srcid::harness::{run_cross_section, CrossSectionConfig, ExperimentConfig, Setup};

fn main() -> srcid::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::from_path(p.as_ref())?,
        None => ExperimentConfig {
            cross_section: CrossSectionConfig { draws: 200, ..Default::default() },
            ..ExperimentConfig::standard()
        },
    };
    let setup = Setup::new(config)?;
    let run = run_cross_section(&setup)?;
    let s = &run.section;
    for i in (0..s.positions.len()).step_by(20) {
        let (_, x, y) = s.positions[i];
        println!("({x:+.2}, {y:+.2}) truth {:+.4} mean {:+.4}", s.values[0][i], s.values[1][i]);
    }
    println!("truth inside the draw envelope at {:.1}% of points", 100.0 * run.bracket_fraction);
    let path = s.to_report(&setup.config).write_to_dir(&setup.config.output_dir)?;
    println!("wrote {}", path.display());
    Ok(())
}
