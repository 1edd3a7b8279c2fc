use std::io::BufReader;
use std::process::Command;
use std::sync::Arc;

use srcid::fem::ForwardSolver;
use srcid::harness::{
    coverage_report, run_coverage, run_estimation_sweep, sweep_report, CrossSectionConfig, ExperimentConfig,
    PriorSpec, Setup,
};
use srcid::mesh::mesh_with_node_count;
use srcid::posterior::{functional_posterior, sample_posterior};
use srcid::priors::series_prior_covariance;
use srcid::spectral::{laplacian_eigenpairs, EigenBasis};
use srcid::synth::{default_diffusivity, generate_observations, ObservationSet, TruthVariant};
use srcid::{conjugate_update, Ellipse, Field, ForwardMatrix, Mesh};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        mesh_nodes: 500,
        prior: PriorSpec::Series { alpha: 0.75, lambda_max: 150.0 },
        sigma: vec![0.001, 0.0002],
        sample_sizes: vec![120, 480],
        replications: 40,
        functionals: vec![1, 3],
        cross_section: CrossSectionConfig { draws: 20, samples: 31, ..Default::default() },
        ..ExperimentConfig::standard()
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = mesh_with_node_count(Ellipse::standard(), 300).unwrap();

    let mut buf = Vec::new();
    mesh.write_to(&mut buf).unwrap();
    let back = Mesh::read_from(BufReader::new(&buf[..])).unwrap();
    assert_eq!(back.nodes(), mesh.nodes());
    assert_eq!(back.elements(), mesh.elements());
    assert_eq!(back.boundary_mask(), mesh.boundary_mask());

    let f = TruthVariant::ThreeSources.field(&mesh);
    let mut buf = Vec::new();
    f.write_to(&mut buf).unwrap();
    assert_eq!(Field::read_from(BufReader::new(&buf[..])).unwrap(), f);

    let basis = laplacian_eigenpairs(&mesh, 100.0).unwrap();
    basis.write_dir(dir.path()).unwrap();
    let read = EigenBasis::read_dir(dir.path(), &mesh).unwrap();
    assert_eq!(read.values(), basis.values());

    let solver = ForwardSolver::new(&mesh, default_diffusivity).unwrap();
    let g = solver.forward_matrix_at_nodes(basis.functions(), &[0, 5, 17]);
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let g2 = ForwardMatrix::read_csv(BufReader::new(&buf[..])).unwrap();
    assert!((g.matrix() - g2.matrix()).amax() <= 1e-15 * g.matrix().amax());

    let obs = generate_observations(&mesh, default_diffusivity, &f, 0.01, 9).unwrap();
    let mut buf = Vec::new();
    obs.write_csv(&mut buf).unwrap();
    let obs2 = ObservationSet::read_csv(BufReader::new(&buf[..])).unwrap();
    assert_eq!(obs2.sigma, Some(0.01));
    assert_eq!(obs2.seed, Some(9));
    assert_eq!(obs2.values, obs.values);
}

#[test]
fn posterior_concentrates_with_more_data() {
    let mesh = mesh_with_node_count(Ellipse::standard(), 800).unwrap();
    let basis = Arc::new(laplacian_eigenpairs(&mesh, 200.0).unwrap());
    let prior = series_prior_covariance(Arc::clone(&basis), 0.75).unwrap();
    let solver = ForwardSolver::new(&mesh, default_diffusivity).unwrap();
    let truth = TruthVariant::ThreeSources.field(&mesh);
    let obs = generate_observations(&mesh, default_diffusivity, &truth, 0.0005, 2).unwrap();
    let mut psi = vec![0.0; basis.len()];
    psi[0] = 1.0;
    let mut last = f64::INFINITY;
    for n in [50, 200, 800] {
        let idx: Vec<usize> = (0..mesh.node_count()).step_by(mesh.node_count() / n).take(n).collect();
        let g = solver.forward_matrix_at_nodes(basis.functions(), &idx);
        let y: Vec<f64> = idx.iter().map(|&i| obs.values[i]).collect();
        let post = conjugate_update(&g, &y, 0.0005, &prior).unwrap();
        let (_, var) = functional_posterior(&post, &psi).unwrap();
        assert!(var < last);
        last = var;
        assert_eq!(sample_posterior(&post, 3, 1).unwrap().len(), 3);
    }
}

#[test]
fn harness_reports_are_reproducible() {
    let setup = Setup::new(small()).unwrap();
    let a = sweep_report(&setup, &run_estimation_sweep(&setup).unwrap());
    let b = sweep_report(&setup, &run_estimation_sweep(&setup).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 4);
    assert!(a.comments[0].contains(&setup.config.hash()));

    let cov = run_coverage(&setup).unwrap();
    assert_eq!(cov.len(), 4);
    assert!(cov.iter().all(|r| (0.0..=1.0).contains(&r.coverage)));

    let dir = tempfile::tempdir().unwrap();
    let path = coverage_report(&setup, &cov).write_to_dir(dir.path()).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# srcid "));
    assert_eq!(text.lines().nth(1), Some("n,j,coverage,replications,radius"));
}

#[test]
fn smaller_noise_gives_smaller_error() {
    let setup = Setup::new(ExperimentConfig { sample_sizes: vec![480], ..small() }).unwrap();
    let rows = run_estimation_sweep(&setup).unwrap();
    assert!(rows[1].error < rows[0].error, "{rows:?}");
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_srcid")).args(args).output().unwrap()
}

#[test]
fn cli_writes_reports_and_maps_errors_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.toml");
    std::fs::write(&cfg_path, small().to_toml()).unwrap();
    let out = dir.path().join("out");
    let (c, o) = (cfg_path.to_str().unwrap(), out.to_str().unwrap());

    for (cmd, file) in [("estimate", "estimation.csv"), ("cross-section", "cross_section.csv"), ("mesh", "mesh.txt")] {
        let res = cli(&["--config", c, "--out", o, "--seed", "3", cmd]);
        assert!(res.status.success(), "{cmd}: {}", String::from_utf8_lossy(&res.stderr));
        assert!(out.join(file).exists(), "{cmd} did not write {file}");
    }
    let saved = ExperimentConfig::from_path(&out.join("config.toml")).unwrap();
    assert_eq!(saved.seed, 3);

    let missing = cli(&["--config", "/definitely/not/here.toml", "mesh"]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "sigma = [0.1]\nsample_sizes = [10]\nbogus = 1\n[prior]\nkind = \"series\"\nalpha = 1.0\nlambda_max = 50.0\n").unwrap();
    assert_eq!(cli(&["--config", bad.to_str().unwrap(), "mesh"]).status.code(), Some(2));

    // Empirical Bayes needs sigma_known = false: a config error.
    assert_eq!(cli(&["--config", c, "--out", o, "empbayes"]).status.code(), Some(2));
}
