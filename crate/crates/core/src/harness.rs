//! Experiment runner: configuration, shared setup, and the sweeps that
//! produce the CSV reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::{hat_functions_on, transfer_nodal, Field, ForwardMatrix, ForwardSolver};
use crate::mesh::{mesh_with_node_count, Ellipse, Mesh, Point};
use crate::posterior::{normal_quantile, sample_posterior, ConjugateSolver, PosteriorBasis};
use crate::priors::{matern_covariance_matrix, series_prior_covariance, PriorCovariance};
use crate::spectral::{asymptotic_variance, laplacian_eigenpairs, weighted_eigenpairs_below, EigenBasis};
use crate::sparse::SparseSymmetricMatrix;
use crate::synth::{
    add_noise, default_diffusivity, l2_error, l2_norm, nearest_neighbor_order, rice_sigma_hat, subsample_indices,
    TruthVariant,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        let e = Ellipse::standard();
        Self { a: e.a, b: e.b, theta: e.theta }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    Series { alpha: f64, lambda_max: f64 },
    Matern { alpha: f64, ell: f64, nodes: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RiceOrder {
    /// Mesh-node storage order.
    #[default]
    Storage,
    /// Greedy nearest-neighbour path through the observation points.
    NearestNeighbor,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CrossSectionConfig {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub samples: usize,
    pub draws: usize,
}

impl Default for CrossSectionConfig {
    fn default() -> Self {
        Self { start: [-1.2, 0.0], end: [1.2, 0.0], samples: 241, draws: 2500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: DomainConfig,
    /// Target node count of the observation mesh.
    #[serde(default = "default_mesh_nodes")]
    pub mesh_nodes: usize,
    pub prior: PriorSpec,
    #[serde(default)]
    pub truth: TruthVariant,
    /// Noise levels; the sweep visits every (n, sigma) pair.
    pub sigma: Vec<f64>,
    /// Must be false for empirical-Bayes runs, which estimate sigma from the
    /// data; `sigma` then only generates the data.
    #[serde(default = "yes")]
    pub sigma_known: bool,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_functionals")]
    pub functionals: Vec<usize>,
    /// Credible level `a`: intervals carry posterior mass `1 - a`.
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub rice_order: RiceOrder,
    /// Weighted eigenpairs for the asymptotic variance go up to this multiple
    /// of the series prior cutoff.
    #[serde(default = "default_variance_cutoff")]
    pub variance_cutoff_factor: f64,
    #[serde(default)]
    pub cross_section: CrossSectionConfig,
}

fn default_mesh_nodes() -> usize {
    4500
}
fn yes() -> bool {
    true
}
fn default_replications() -> usize {
    500
}
fn default_functionals() -> Vec<usize> {
    vec![2, 4, 8, 16]
}
fn default_level() -> f64 {
    0.05
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_variance_cutoff() -> f64 {
    4.0
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Series prior, alpha = 3/4, lambda_max = 500, sigma = 0.0005, n = 4500.
    pub fn standard() -> Self {
        Self {
            domain: DomainConfig::default(),
            mesh_nodes: 4500,
            prior: PriorSpec::Series { alpha: 0.75, lambda_max: 500.0 },
            truth: TruthVariant::default(),
            sigma: vec![0.0005],
            sigma_known: true,
            sample_sizes: vec![4500],
            replications: 500,
            functionals: default_functionals(),
            level: 0.05,
            seed: 0,
            output_dir: default_out(),
            rice_order: RiceOrder::Storage,
            variance_cutoff_factor: 4.0,
            cross_section: CrossSectionConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn ellipse(&self) -> Result<Ellipse> {
        Ellipse::new(self.domain.a, self.domain.b, self.domain.theta).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.ellipse()?;
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.mesh_nodes < 16 {
            return Err(config_err("mesh_nodes must be at least 16"));
        }
        match self.prior {
            PriorSpec::Series { alpha, lambda_max } => {
                if !(alpha >= 0.0 && alpha.is_finite()) || !pos(lambda_max) {
                    return Err(config_err("series prior needs alpha >= 0 and lambda_max > 0"));
                }
            }
            PriorSpec::Matern { alpha, ell, nodes } => {
                if !pos(alpha) || !pos(ell) || nodes < 16 {
                    return Err(config_err("Matérn prior needs alpha > 0, ell > 0 and nodes >= 16"));
                }
            }
        }
        if self.sigma.is_empty() || self.sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(config_err("sigma must be a non-empty list of non-negative numbers"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 2 || n > self.mesh_nodes) {
            return Err(config_err("sample sizes must lie in 2..=mesh_nodes"));
        }
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        if self.functionals.iter().any(|&j| j == 0) {
            return Err(config_err("functional indices are 1-based"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(config_err("level must lie in (0, 1)"));
        }
        if !pos(self.variance_cutoff_factor) {
            return Err(config_err("variance_cutoff_factor must be positive"));
        }
        if self.cross_section.samples < 2 {
            return Err(config_err("cross_section.samples must be at least 2"));
        }
        Ok(())
    }
}

/// The discretized parameter space.
#[derive(Debug, Clone)]
pub enum Model {
    Series { basis: Arc<EigenBasis> },
    Matern { coarse: Mesh, coarse_mass: Arc<SparseSymmetricMatrix> },
}

/// Everything shared read-only between replications.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub mesh: Mesh,
    pub solver: ForwardSolver,
    pub truth: Field,
    pub truth_norm: f64,
    /// Noiseless forward solution at every mesh node.
    pub clean: Vec<f64>,
    pub model: Model,
    pub prior: PriorCovariance,
    /// Forward matrix with one row per mesh node.
    pub forward: ForwardMatrix,
}

impl Setup {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let ellipse = config.ellipse()?;
        let mesh = mesh_with_node_count(ellipse, config.mesh_nodes)?;
        if mesh.node_count() < *config.sample_sizes.iter().max().unwrap() {
            return Err(config_err(format!("mesh has only {} nodes", mesh.node_count())));
        }
        let solver = ForwardSolver::new(&mesh, default_diffusivity)?;
        let truth = config.truth.field(&mesh);
        let truth_norm = l2_norm(&truth, solver.mass())?;
        let clean = solver.solve(&truth)?.coeffs;
        let all: Vec<usize> = (0..mesh.node_count()).collect();
        let (model, prior, forward) = match config.prior {
            PriorSpec::Series { alpha, lambda_max } => {
                let basis = Arc::new(laplacian_eigenpairs(&mesh, lambda_max)?);
                let prior = series_prior_covariance(Arc::clone(&basis), alpha)?;
                let forward = solver.forward_matrix_at_nodes(basis.functions(), &all);
                (Model::Series { basis }, prior, forward)
            }
            PriorSpec::Matern { alpha, ell, nodes } => {
                let coarse = mesh_with_node_count(ellipse, nodes)?;
                let prior = matern_covariance_matrix(coarse.nodes(), alpha, ell)?;
                let hats = hat_functions_on(&coarse, &mesh);
                let forward = solver.forward_matrix_at_nodes(&hats, &all);
                let coarse_mass = Arc::new(crate::fem::assemble_mass(&coarse));
                (Model::Matern { coarse, coarse_mass }, prior, forward)
            }
        };
        Ok(Self { config, mesh, solver, truth, truth_norm, clean, model, prior, forward })
    }

    pub fn mass(&self) -> &SparseSymmetricMatrix {
        self.solver.mass()
    }

    pub fn basis(&self) -> Result<&Arc<EigenBasis>> {
        match &self.model {
            Model::Series { basis } => Ok(basis),
            Model::Matern { .. } => Err(config_err("this experiment needs a series prior")),
        }
    }

    /// Conjugate solver for observations at mesh nodes `idx`.
    pub fn conjugate(&self, idx: &[usize], sigma: f64) -> Result<ConjugateSolver> {
        let solver = ConjugateSolver::new(&self.forward.select_rows(idx), sigma, &self.prior)?;
        Ok(match &self.model {
            Model::Series { .. } => solver,
            Model::Matern { coarse_mass, .. } => solver.with_basis(PosteriorBasis::Nodal(Arc::clone(coarse_mass))),
        })
    }

    /// Nodal field on the observation mesh from posterior coefficients.
    pub fn field_from_coeffs(&self, coeffs: &[f64]) -> Field {
        match &self.model {
            Model::Series { basis } => Field::nodal(basis.synthesize(coeffs)),
            Model::Matern { coarse, .. } => Field::nodal(transfer_nodal(coarse, coeffs, &self.mesh)),
        }
    }

    pub fn error_of(&self, coeffs: &[f64]) -> Result<f64> {
        l2_error(&self.field_from_coeffs(coeffs), &self.truth, self.mass())
    }

    /// Noisy observations at `idx` for noise level number `k` of the config.
    /// All sample sizes share one noise realization per level, so smaller
    /// data sets are subsets of larger ones.
    pub fn sweep_data(&self, idx: &[usize], k: usize) -> Vec<f64> {
        let sigma = self.config.sigma[k];
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1 + k as u64);
        let noisy = add_noise(&self.clean, sigma, &mut rng);
        idx.iter().map(|&i| noisy[i]).collect()
    }

    /// Independent data set number `replicate` at nodes `idx`.
    pub fn replicate_data(&self, idx: &[usize], sigma: f64, replicate: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(((idx.len() as u64) << 32) | (1 << 31) | replicate as u64);
        let clean: Vec<f64> = idx.iter().map(|&i| self.clean[i]).collect();
        add_noise(&clean, sigma, &mut rng)
    }

    pub fn subsample(&self, n: usize) -> Result<Vec<usize>> {
        subsample_indices(self.mesh.node_count(), n, self.config.seed)
    }

    fn noise_level(&self) -> f64 {
        self.config.sigma[0]
    }
}

/// CSV table with a comment header naming the library version and config.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: String,
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    fn new(name: &str, config: &ExperimentConfig, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            comments: vec![format!("srcid {VERSION} config={}", config.hash())],
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "# {c}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.to_csv())?;
        Ok(path)
    }
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub sigma: f64,
    pub error: f64,
    pub rel_error: f64,
    pub seed: u64,
}

pub fn run_estimation_sweep(setup: &Setup) -> Result<Vec<SweepRow>> {
    let cfg = &setup.config;
    let mut rows = Vec::new();
    for &n in &cfg.sample_sizes {
        let idx = setup.subsample(n)?;
        for (k, &sigma) in cfg.sigma.iter().enumerate() {
            if sigma == 0.0 {
                return Err(config_err("the estimation sweep needs positive noise levels"));
            }
            let y = setup.sweep_data(&idx, k);
            let mean = setup.conjugate(&idx, sigma)?.mean(&y)?;
            let error = setup.error_of(mean.as_slice())?;
            rows.push(SweepRow { n, sigma, error, rel_error: error / setup.truth_norm, seed: cfg.seed });
        }
    }
    Ok(rows)
}

pub fn sweep_report(setup: &Setup, rows: &[SweepRow]) -> Report {
    let mut r = Report::new("estimation", &setup.config, &["n", "sigma", "error", "rel_error", "seed"]);
    r.rows = rows
        .iter()
        .map(|x| vec![x.n.to_string(), num(x.sigma), num(x.error), num(x.rel_error), x.seed.to_string()])
        .collect();
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub n: usize,
    pub j: usize,
    pub coverage: f64,
    pub replications: usize,
    pub radius: f64,
}

/// Frequentist coverage of the analytic credible intervals for `<f, phi_j>`.
pub fn run_coverage(setup: &Setup) -> Result<Vec<CoverageRow>> {
    let cfg = &setup.config;
    let basis = setup.basis()?;
    check_functionals(cfg, basis.len())?;
    let truth = basis.project(&setup.truth.coeffs);
    let sigma = setup.noise_level();
    if sigma == 0.0 {
        return Err(config_err("coverage needs a positive noise level"));
    }
    let z = normal_quantile(cfg.level);
    let mut rows = Vec::new();
    for &n in &cfg.sample_sizes {
        let idx = setup.subsample(n)?;
        let conj = setup.conjugate(&idx, sigma)?;
        let radius: Vec<f64> =
            cfg.functionals.iter().map(|&j| z * conj.covariance()[(j - 1, j - 1)].sqrt()).collect();
        let hits: Vec<Vec<bool>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let mean = conj.mean(&setup.replicate_data(&idx, sigma, r))?;
                Ok(cfg
                    .functionals
                    .iter()
                    .zip(&radius)
                    .map(|(&j, rad)| (mean[j - 1] - truth[j - 1]).abs() <= *rad)
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (k, &j) in cfg.functionals.iter().enumerate() {
            let count = hits.iter().filter(|h| h[k]).count();
            rows.push(CoverageRow {
                n,
                j,
                coverage: count as f64 / cfg.replications as f64,
                replications: cfg.replications,
                radius: radius[k],
            });
        }
    }
    Ok(rows)
}

pub fn coverage_report(setup: &Setup, rows: &[CoverageRow]) -> Report {
    let mut r = Report::new("coverage", &setup.config, &["n", "j", "coverage", "replications", "radius"]);
    r.rows = rows
        .iter()
        .map(|x| vec![x.n.to_string(), x.j.to_string(), num(x.coverage), x.replications.to_string(), num(x.radius)])
        .collect();
    r
}

fn check_functionals(cfg: &ExperimentConfig, available: usize) -> Result<()> {
    if let Some(&j) = cfg.functionals.iter().find(|&&j| j > available) {
        return Err(config_err(format!("functional index {j} exceeds the {available} computed eigenfunctions")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub j: usize,
    pub replicate: usize,
    pub estimate: f64,
    pub truth: f64,
    pub predicted_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltSummary {
    pub j: usize,
    pub n: usize,
    pub truth: f64,
    pub mean: f64,
    pub std: f64,
    /// `|div(c grad phi_j)|_2 sigma / sqrt(n)`
    pub predicted_std: f64,
    /// Share of the asymptotic variance carried by the last decile of terms.
    pub tail_fraction: f64,
    pub domain_area: f64,
}

#[derive(Debug, Clone)]
pub struct CltResult {
    pub rows: Vec<CltRow>,
    pub summaries: Vec<CltSummary>,
}

/// Replicated plug-in estimates `<f_n, phi_j>` at the first sample size.
pub fn run_clt(setup: &Setup) -> Result<CltResult> {
    let cfg = &setup.config;
    let basis = setup.basis()?;
    check_functionals(cfg, basis.len())?;
    let lambda_max = match cfg.prior {
        PriorSpec::Series { lambda_max, .. } => lambda_max,
        PriorSpec::Matern { .. } => unreachable!(),
    };
    let weighted = weighted_eigenpairs_below(&setup.mesh, default_diffusivity, cfg.variance_cutoff_factor * lambda_max)?;
    let truth = basis.project(&setup.truth.coeffs);
    let sigma = setup.noise_level();
    let n = cfg.sample_sizes[0];
    let idx = setup.subsample(n)?;
    // A zero noise level still needs a well-posed update; the estimates are
    // deterministic either way.
    let conj = setup.conjugate(&idx, if sigma > 0.0 { sigma } else { 1e-3 })?;
    let means: Vec<_> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| conj.mean(&setup.replicate_data(&idx, sigma, r)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &j in &cfg.functionals {
        let av = asymptotic_variance(basis.function(j - 1), &weighted)?;
        let predicted_std = av.value.sqrt() * sigma / (n as f64).sqrt();
        let est: Vec<f64> = means.iter().map(|m| m[j - 1]).collect();
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let var = if est.len() > 1 {
            est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64
        } else {
            0.0
        };
        for (r, &e) in est.iter().enumerate() {
            rows.push(CltRow { j, replicate: r, estimate: e, truth: truth[j - 1], predicted_std });
        }
        summaries.push(CltSummary {
            j,
            n,
            truth: truth[j - 1],
            mean,
            std: var.sqrt(),
            predicted_std,
            tail_fraction: av.tail_fraction,
            domain_area: setup.mesh.area(),
        });
    }
    Ok(CltResult { rows, summaries })
}

pub fn clt_report(setup: &Setup, result: &CltResult) -> Report {
    let mut r = Report::new("clt", &setup.config, &["j", "replicate", "estimate", "truth", "predicted_std"]);
    for s in &result.summaries {
        r.comments.push(format!(
            "j={} n={} mean={:.6e} std={:.6e} predicted_std={:.6e} tail_fraction={:.3e}",
            s.j, s.n, s.mean, s.std, s.predicted_std, s.tail_fraction
        ));
    }
    r.rows = result
        .rows
        .iter()
        .map(|x| vec![x.j.to_string(), x.replicate.to_string(), num(x.estimate), num(x.truth), num(x.predicted_std)])
        .collect();
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBayesRow {
    pub n: usize,
    pub sigma_hat: f64,
    pub error: f64,
    pub rel_error: f64,
    /// Error of the same data analysed with the true noise level.
    pub known_sigma_error: f64,
}

/// Plug-in analysis with the difference-based noise estimate, on the same
/// data sets as the estimation sweep (first noise level).
pub fn run_empirical_bayes(setup: &Setup) -> Result<Vec<EmpiricalBayesRow>> {
    let cfg = &setup.config;
    if cfg.sigma_known {
        return Err(config_err("empirical Bayes runs need `sigma_known = false`"));
    }
    let sigma = setup.noise_level();
    let mut rows = Vec::new();
    for &n in &cfg.sample_sizes {
        let idx = setup.subsample(n)?;
        let y = setup.sweep_data(&idx, 0);
        let ordered: Vec<f64> = match cfg.rice_order {
            RiceOrder::Storage => y.clone(),
            RiceOrder::NearestNeighbor => {
                let pts: Vec<Point> = idx.iter().map(|&i| setup.mesh.nodes()[i]).collect();
                nearest_neighbor_order(&pts).into_iter().map(|i| y[i]).collect()
            }
        };
        let sigma_hat = rice_sigma_hat(&ordered)?;
        if sigma_hat == 0.0 {
            return Err(Error::NumericalFailure("estimated noise level is zero".into()));
        }
        let error = setup.error_of(setup.conjugate(&idx, sigma_hat)?.mean(&y)?.as_slice())?;
        let known_sigma_error = if sigma > 0.0 {
            setup.error_of(setup.conjugate(&idx, sigma)?.mean(&y)?.as_slice())?
        } else {
            f64::NAN
        };
        rows.push(EmpiricalBayesRow { n, sigma_hat, error, rel_error: error / setup.truth_norm, known_sigma_error });
    }
    Ok(rows)
}

pub fn empirical_bayes_report(setup: &Setup, rows: &[EmpiricalBayesRow]) -> Report {
    let mut r = Report::new(
        "empirical_bayes",
        &setup.config,
        &["n", "sigma_hat", "error", "rel_error", "known_sigma_error"],
    );
    r.rows = rows
        .iter()
        .map(|x| vec![x.n.to_string(), num(x.sigma_hat), num(x.error), num(x.rel_error), num(x.known_sigma_error)])
        .collect();
    r
}

/// Straight segment from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub start: Point,
    pub end: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub names: Vec<String>,
    /// `(t, x, y)` for every in-domain sample.
    pub positions: Vec<(f64, f64, f64)>,
    /// `values[k][i]`: field `k` at position `i`.
    pub values: Vec<Vec<f64>>,
    pub warning: Option<String>,
}

/// Values of nodal fields along `line` at `samples` equally spaced
/// parameters `t` in [0, 1]; points outside the mesh are skipped.
pub fn emit_cross_section(mesh: &Mesh, fields: &[(&str, &Field)], line: Line, samples: usize) -> Result<CrossSection> {
    if samples < 2 {
        return Err(crate::error::invalid("a cross-section needs at least two samples"));
    }
    for (name, f) in fields {
        if f.basis != crate::fem::BasisKind::FemNodal || f.len() != mesh.node_count() {
            return Err(crate::error::invalid(format!("field '{name}' is not nodal on this mesh")));
        }
    }
    let mut positions = Vec::new();
    let mut values = vec![Vec::new(); fields.len()];
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let p = [
            line.start[0] + t * (line.end[0] - line.start[0]),
            line.start[1] + t * (line.end[1] - line.start[1]),
        ];
        let Some(loc) = mesh.locate(p) else { continue };
        positions.push((t, p[0], p[1]));
        for (k, (_, f)) in fields.iter().enumerate() {
            values[k].push(mesh.evaluate_at(&f.coeffs, &loc));
        }
    }
    let warning = positions.is_empty().then(|| "line does not intersect the domain".to_string());
    Ok(CrossSection { names: fields.iter().map(|(n, _)| n.to_string()).collect(), positions, values, warning })
}

impl CrossSection {
    pub fn to_report(&self, config: &ExperimentConfig) -> Report {
        let mut cols = vec!["t".to_string(), "x".into(), "y".into()];
        cols.extend(self.names.iter().cloned());
        let mut r = Report::new("cross_section", config, &[]);
        r.columns = cols;
        if let Some(w) = &self.warning {
            r.comments.push(format!("warning: {w}"));
        }
        r.rows = self
            .positions
            .iter()
            .enumerate()
            .map(|(i, &(t, x, y))| {
                let mut row = vec![num(t), num(x), num(y)];
                row.extend(self.values.iter().map(|v| num(v[i])));
                row
            })
            .collect();
        r
    }
}

#[derive(Debug, Clone)]
pub struct CrossSectionRun {
    pub section: CrossSection,
    /// Fraction of in-domain samples where the truth lies within the
    /// pointwise range of the posterior draws.
    pub bracket_fraction: f64,
}

/// Truth, posterior mean and posterior draws along the configured line, for
/// the largest sample size and first noise level.
pub fn run_cross_section(setup: &Setup) -> Result<CrossSectionRun> {
    let cfg = &setup.config;
    let n = *cfg.sample_sizes.iter().max().unwrap();
    let idx = setup.subsample(n)?;
    let sigma = setup.noise_level();
    if sigma == 0.0 {
        return Err(config_err("cross-sections need a positive noise level"));
    }
    let post = setup.conjugate(&idx, sigma)?.posterior(&setup.sweep_data(&idx, 0))?;
    let mean = setup.field_from_coeffs(post.mean().as_slice());
    let draws: Vec<Field> = if cfg.cross_section.draws > 0 {
        sample_posterior(&post, cfg.cross_section.draws, cfg.seed ^ 0x5eed)?
            .iter()
            .map(|d| setup.field_from_coeffs(d))
            .collect()
    } else {
        Vec::new()
    };
    let names: Vec<String> = (1..=draws.len()).map(|i| format!("draw_{i}")).collect();
    let mut fields: Vec<(&str, &Field)> = vec![("truth", &setup.truth), ("mean", &mean)];
    fields.extend(names.iter().map(|s| s.as_str()).zip(draws.iter()));
    let line = Line { start: cfg.cross_section.start, end: cfg.cross_section.end };
    let section = emit_cross_section(&setup.mesh, &fields, line, cfg.cross_section.samples)?;
    let m = section.positions.len();
    let bracketed = (0..m)
        .filter(|&i| {
            let t = section.values[0][i];
            let (lo, hi) = section.values[2..]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[i]), hi.max(v[i])));
            lo <= t && t <= hi
        })
        .count();
    let bracket_fraction = if m == 0 || draws.is_empty() { 0.0 } else { bracketed as f64 / m as f64 };
    Ok(CrossSectionRun { section, bracket_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            mesh_nodes: 400,
            prior: PriorSpec::Series { alpha: 0.75, lambda_max: 150.0 },
            sample_sizes: vec![100, 400],
            replications: 20,
            functionals: vec![1, 2],
            cross_section: CrossSectionConfig { draws: 30, samples: 21, ..Default::default() },
            ..ExperimentConfig::standard()
        }
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = small_config();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn documented_keys_parse() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            sigma = [0.0005]
            sample_sizes = [250, 1000]
            [prior]
            kind = "matern"
            alpha = 10.0
            ell = 0.25
            nodes = 1169
            "#,
        )
        .unwrap();
        assert_eq!(cfg.prior, PriorSpec::Matern { alpha: 10.0, ell: 0.25, nodes: 1169 });
        assert_eq!(cfg.replications, 500);
        assert_eq!(cfg.truth, TruthVariant::ThreeSources);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for bad in [
            "sigma = [0.1]\nsample_sizes = [0]\n[prior]\nkind = \"series\"\nalpha = 1.0\nlambda_max = 10.0",
            "sigma = [-1.0]\nsample_sizes = [10]\n[prior]\nkind = \"series\"\nalpha = 1.0\nlambda_max = 10.0",
            "sigma = [0.1]\nsample_sizes = [10]\n[prior]\nkind = \"series\"\nalpha = 1.0\nlambda_max = -1.0",
            "sigma = [0.1]\nsample_sizes = [10]\nbogus = 3\n[prior]\nkind = \"series\"\nalpha = 1.0\nlambda_max = 10.0",
            "sigma = [0.1]\nsample_sizes = [10]\nreplications = 0\n[prior]\nkind = \"series\"\nalpha = 1.0\nlambda_max = 10.0",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn small_runs_are_deterministic() {
        let setup = Setup::new(small_config()).unwrap();
        let a = sweep_report(&setup, &run_estimation_sweep(&setup).unwrap()).to_csv();
        let b = sweep_report(&setup, &run_estimation_sweep(&setup).unwrap()).to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with(&format!("# srcid {VERSION} config=")));
        let c1 = coverage_report(&setup, &run_coverage(&setup).unwrap()).to_csv();
        let c2 = coverage_report(&setup, &run_coverage(&setup).unwrap()).to_csv();
        assert_eq!(c1, c2);
    }

    #[test]
    fn zero_noise_clt_has_no_spread() {
        let mut cfg = small_config();
        cfg.sigma = vec![0.0];
        let setup = Setup::new(cfg).unwrap();
        let res = run_clt(&setup).unwrap();
        assert!(res.summaries.iter().all(|s| s.std <= 1e-12 * s.mean.abs() && s.predicted_std == 0.0));
    }

    #[test]
    fn cross_section_of_constant_field() {
        let setup = Setup::new(small_config()).unwrap();
        let one = Field::from_fn(&setup.mesh, |_| 1.0);
        let line = Line { start: [-1.5, 0.0], end: [1.5, 0.0] };
        let cs = emit_cross_section(&setup.mesh, &[("one", &one)], line, 61).unwrap();
        assert!(!cs.positions.is_empty() && cs.positions.len() < 61);
        assert!(cs.values[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
        let miss = emit_cross_section(&setup.mesh, &[("one", &one)], Line { start: [3.0, 3.0], end: [4.0, 3.0] }, 5)
            .unwrap();
        assert!(miss.positions.is_empty() && miss.warning.is_some());
        let run = run_cross_section(&setup).unwrap();
        assert_eq!(run.section.names.len(), 32);
    }
}
