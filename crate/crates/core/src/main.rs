use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use srcid::harness::{self, ExperimentConfig, Setup};
use srcid::Error;

#[derive(Parser)]
#[command(name = "srcid", version, about = "Bayesian source identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config; the built-in standard config when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the observation mesh and write mesh.txt.
    Mesh,
    /// Laplacian eigenpairs of the series prior.
    Eigs,
    /// Forward matrix at all mesh nodes.
    Forward,
    /// Relative L2 error over the (n, sigma) grid.
    Estimate,
    /// Frequentist coverage of credible intervals.
    Coverage,
    /// Spread of plug-in functional estimates against the asymptotic variance.
    Clt,
    /// Analysis with a difference-based noise estimate.
    Empbayes,
    /// Truth, posterior mean and draws along a line.
    CrossSection,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3 for failures of the numerics, 2 for bad input of any kind.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericalFailure(_) | Error::OutOfDomain(..) | Error::InvalidCoefficient { .. } => 3,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Parse(_) | Error::Io(_) => 2,
    }
}

fn run(cli: Cli) -> srcid::Result<()> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::standard(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.out {
        config.output_dir = o;
    }
    let out = config.output_dir.clone();
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.toml"), config.to_toml())?;

    let setup = Setup::new(config)?;
    let written = match cli.command {
        Command::Mesh => {
            let path = out.join("mesh.txt");
            setup.mesh.write_to(BufWriter::new(File::create(&path)?))?;
            eprintln!("{} nodes, {} elements", setup.mesh.node_count(), setup.mesh.element_count());
            path
        }
        Command::Eigs => {
            let basis = setup.basis()?;
            let dir = out.join("eigs");
            basis.write_dir(&dir)?;
            eprintln!("{} eigenpairs, largest {:.4}", basis.len(), basis.values().last().copied().unwrap_or(0.0));
            dir
        }
        Command::Forward => {
            let path = out.join("forward.csv");
            setup.forward.write_csv(BufWriter::new(File::create(&path)?))?;
            path
        }
        Command::Estimate => {
            let rows = harness::run_estimation_sweep(&setup)?;
            harness::sweep_report(&setup, &rows).write_to_dir(&out)?
        }
        Command::Coverage => {
            let rows = harness::run_coverage(&setup)?;
            harness::coverage_report(&setup, &rows).write_to_dir(&out)?
        }
        Command::Clt => {
            let res = harness::run_clt(&setup)?;
            harness::clt_report(&setup, &res).write_to_dir(&out)?
        }
        Command::Empbayes => {
            let rows = harness::run_empirical_bayes(&setup)?;
            harness::empirical_bayes_report(&setup, &rows).write_to_dir(&out)?
        }
        Command::CrossSection => {
            let run = harness::run_cross_section(&setup)?;
            if let Some(w) = &run.section.warning {
                eprintln!("warning: {w}");
            }
            run.section.to_report(&setup.config).write_to_dir(&out)?
        }
    };
    println!("{}", written.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NumericalFailure("x".into())), 3);
        assert_eq!(exit_code(&Error::OutOfDomain(2.0, 0.0)), 3);
        assert_eq!(exit_code(&Error::InvalidCoefficient { value: -1.0, x: 0.0, y: 0.0 }), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 2);
    }
}
