//! Generalized symmetric eigenproblems `K x = lambda M x` on interior nodes.
//!
//! Small problems go through a dense reduction. Larger ones use a block
//! Krylov space of the shift-inverted operator `K^{-1} M` with full
//! M-orthogonalization and Rayleigh-Ritz extraction. The number of
//! eigenvalues below a cutoff is cross-checked against the inertia of
//! `K - cutoff * M`, so a missed eigenvalue forces further expansion rather
//! than silently shortening the spectrum.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, Field};
use crate::mesh::{Mesh, Point};
use crate::sparse::{count_eigenvalues_below, SparseCholesky, SparseSymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Laplacian,
    WeightedByC,
}

impl Weight {
    fn tag(self) -> &'static str {
        match self {
            Weight::Laplacian => "laplacian",
            Weight::WeightedByC => "weighted-by-c",
        }
    }
}

/// Eigenpairs with M-orthonormal nodal eigenfunctions (zero on the boundary).
#[derive(Debug, Clone)]
pub struct EigenBasis {
    values: Vec<f64>,
    functions: Vec<Vec<f64>>,
    weight: Weight,
    mass: Arc<SparseSymmetricMatrix>,
}

#[derive(Debug, Clone, Copy)]
pub enum Target {
    /// Every eigenvalue in `(0, cutoff]`.
    Below(f64),
    /// The smallest `count` eigenvalues.
    Count(usize),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub block_size: usize,
    /// Relative residual `|K x - l M x| / (l |M x|)` required of every pair.
    pub tolerance: f64,
    /// Interior sizes up to this use the dense reduction.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { block_size: 4, tolerance: 1e-10, dense_limit: 600, seed: 0x6569_6773 }
    }
}

pub fn laplacian_eigenpairs(mesh: &Mesh, lambda_max: f64) -> Result<EigenBasis> {
    if !(lambda_max > 0.0) {
        return Err(invalid(format!("lambda_max must be positive, got {lambda_max}")));
    }
    eigenpairs(mesh, |_| 1.0, Target::Below(lambda_max), Weight::Laplacian, &SolverOptions::default())
}

pub fn weighted_eigenpairs(mesh: &Mesh, c: impl Fn(Point) -> f64, count: usize) -> Result<EigenBasis> {
    let interior = mesh.interior_nodes().len();
    if count == 0 || count > interior {
        return Err(invalid(format!("eigenpair count must be in 1..={interior}, got {count}")));
    }
    eigenpairs(mesh, c, Target::Count(count), Weight::WeightedByC, &SolverOptions::default())
}

/// Weighted eigenpairs with eigenvalue at most `cutoff`.
pub fn weighted_eigenpairs_below(mesh: &Mesh, c: impl Fn(Point) -> f64, cutoff: f64) -> Result<EigenBasis> {
    if !(cutoff > 0.0) {
        return Err(invalid(format!("cutoff must be positive, got {cutoff}")));
    }
    eigenpairs(mesh, c, Target::Below(cutoff), Weight::WeightedByC, &SolverOptions::default())
}

pub fn eigenpairs(
    mesh: &Mesh,
    c: impl Fn(Point) -> f64,
    target: Target,
    weight: Weight,
    opts: &SolverOptions,
) -> Result<EigenBasis> {
    let stiffness = assemble_stiffness(mesh, c)?;
    let mass = assemble_mass(mesh);
    let interior = mesh.interior_nodes();
    let k = stiffness.submatrix(&interior);
    let m = mass.submatrix(&interior);
    let (values, vectors) = solve_pencil(&k, &m, target, opts)?;
    let n = mesh.node_count();
    let functions = vectors
        .into_iter()
        .map(|v| {
            let mut full = vec![0.0; n];
            for (&i, x) in interior.iter().zip(v) {
                full[i] = x;
            }
            full
        })
        .collect();
    Ok(EigenBasis { values, functions, weight, mass: Arc::new(mass) })
}

/// Eigenpairs of the pencil `(k, m)` as requested by `target`, ascending,
/// with M-orthonormal vectors whose largest-magnitude entry is positive.
pub fn solve_pencil(
    k: &SparseSymmetricMatrix,
    m: &SparseSymmetricMatrix,
    target: Target,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k.dim();
    if m.dim() != n {
        return Err(invalid("stiffness and mass dimensions differ"));
    }
    if let Target::Count(c) = target {
        if c == 0 || c > n {
            return Err(invalid(format!("eigenpair count must be in 1..={n}")));
        }
    }
    let mut pairs = if n <= opts.dense_limit {
        dense_pencil(k, m)?
    } else {
        krylov_pencil(k, m, target, opts)?
    };
    match target {
        Target::Below(cut) => pairs.retain(|(l, _)| *l <= cut),
        Target::Count(c) => pairs.truncate(c),
    }
    for (_, v) in pairs.iter_mut() {
        fix_sign(v);
    }
    order_pairs(&mut pairs);
    Ok(pairs.into_iter().unzip())
}

fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn order_pairs(pairs: &mut [(f64, Vec<f64>)]) {
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .find(|(x, y)| x != y)
                .map(|(x, y)| x.partial_cmp(y).unwrap())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

fn dense_pencil(k: &SparseSymmetricMatrix, m: &SparseSymmetricMatrix) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = k.dim();
    let chol = m
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular mass factor".into()))?;
    let mut a = &linv * k.to_dense() * linv.transpose();
    a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let y = eig.eigenvectors.column(i).into_owned();
        let x = l.transpose().solve_upper_triangular(&y).ok_or_else(|| {
            Error::NumericalFailure("back substitution failed in dense eigensolve".into())
        })?;
        pairs.push((eig.eigenvalues[i], x.iter().cloned().collect()));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(pairs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

struct KrylovBasis<'a> {
    m: &'a SparseSymmetricMatrix,
    q: Vec<Vec<f64>>,
    mq: Vec<Vec<f64>>,
}

impl KrylovBasis<'_> {
    /// M-orthogonalizes `v` against the basis (two passes) and appends it
    /// unless it is numerically dependent.
    fn push(&mut self, mut v: Vec<f64>) -> bool {
        let start_norm = dot(&v, &self.m.mul_vec(&v)).sqrt();
        if start_norm == 0.0 || !start_norm.is_finite() {
            return false;
        }
        for _ in 0..2 {
            let coeffs: Vec<f64> = self.mq.par_iter().map(|mq| dot(mq, &v)).collect();
            for (c, q) in coeffs.iter().zip(&self.q) {
                axpy(-c, q, &mut v);
            }
        }
        let mv = self.m.mul_vec(&v);
        let norm = dot(&v, &mv).sqrt();
        if norm < 1e-10 * start_norm {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        self.q.push(v);
        self.mq.push(mv.into_iter().map(|x| x / norm).collect());
        true
    }
}

fn krylov_pencil(
    k: &SparseSymmetricMatrix,
    m: &SparseSymmetricMatrix,
    target: Target,
    opts: &SolverOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = k.dim();
    let chol = SparseCholesky::new(k)?;
    let wanted = match target {
        Target::Below(cut) => count_eigenvalues_below(k, m, cut)?,
        Target::Count(c) => c,
    };
    if wanted == 0 {
        return Ok(Vec::new());
    }
    let block = opts.block_size.max(1);
    let mut check_dim = (2 * wanted + 8 * block).min(n);
    let mut basis = KrylovBasis { m, q: Vec::new(), mq: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut last: Vec<usize> = Vec::new();
    for _ in 0..block {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        if basis.push(chol.solve(&m.mul_vec(&v))) {
            last.push(basis.q.len() - 1);
        }
    }
    loop {
        let exhausted = last.is_empty();
        if basis.q.len() >= check_dim || basis.q.len() >= n || exhausted {
            let ritz = rayleigh_ritz(k, &basis)?;
            if let Some(found) = accept(&ritz, target, wanted, opts.tolerance, k, m)? {
                return Ok(found);
            }
            if basis.q.len() >= n || exhausted {
                return Err(Error::NumericalFailure(format!(
                    "eigensolver exhausted the Krylov space ({} vectors) without converging {wanted} pairs",
                    basis.q.len()
                )));
            }
            check_dim = ((check_dim as f64 * 1.4) as usize).max(check_dim + block).min(n);
        }
        let next: Vec<Vec<f64>> = last.par_iter().map(|&i| chol.solve(&basis.mq[i])).collect();
        last.clear();
        for v in next {
            if basis.push(v) {
                last.push(basis.q.len() - 1);
            }
        }
        if last.is_empty() && basis.q.len() < n {
            // Invariant subspace reached; restart with a fresh random block.
            for _ in 0..block {
                let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                if basis.push(chol.solve(&m.mul_vec(&v))) {
                    last.push(basis.q.len() - 1);
                }
            }
        }
    }
}

struct RitzPair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

fn rayleigh_ritz(k: &SparseSymmetricMatrix, basis: &KrylovBasis<'_>) -> Result<Vec<RitzPair>> {
    let dim = basis.q.len();
    let kq: Vec<Vec<f64>> = basis.q.par_iter().map(|q| k.mul_vec(q)).collect();
    let mut small = DMatrix::zeros(dim, dim);
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| dot(&basis.q[i], &kq[j])).collect())
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            small[(i, j)] = v;
            small[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(small);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let n = basis.q[0].len();
    let pairs = order
        .par_iter()
        .map(|&idx| {
            let s = eig.eigenvectors.column(idx);
            let theta = eig.eigenvalues[idx];
            let mut x = vec![0.0; n];
            let mut kx = vec![0.0; n];
            let mut mx = vec![0.0; n];
            for j in 0..dim {
                axpy(s[j], &basis.q[j], &mut x);
                axpy(s[j], &kq[j], &mut kx);
                axpy(s[j], &basis.mq[j], &mut mx);
            }
            let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
            let scale = theta.abs() * dot(&mx, &mx).sqrt();
            RitzPair { value: theta, vector: x, residual: r / scale.max(f64::MIN_POSITIVE) }
        })
        .collect();
    Ok(pairs)
}

/// Returns the converged pairs if the target is met and the inertia count
/// agrees with the number of Ritz values below the separating shift.
fn accept(
    ritz: &[RitzPair],
    target: Target,
    wanted: usize,
    tol: f64,
    k: &SparseSymmetricMatrix,
    m: &SparseSymmetricMatrix,
) -> Result<Option<Vec<(f64, Vec<f64>)>>> {
    if ritz.len() < wanted || ritz[..wanted].iter().any(|p| !(p.residual <= tol)) {
        return Ok(None);
    }
    let shift = match target {
        Target::Below(cut) => cut,
        Target::Count(_) => match ritz.get(wanted) {
            Some(next) if next.residual <= tol => 0.5 * (ritz[wanted - 1].value + next.value),
            Some(_) => return Ok(None),
            None => ritz[wanted - 1].value * (1.0 + 1e-9) + f64::MIN_POSITIVE,
        },
    };
    let below = ritz.iter().take_while(|p| p.value < shift).count();
    if below != wanted || count_eigenvalues_below(k, m, shift)? != wanted {
        return Ok(None);
    }
    Ok(Some(ritz[..wanted].iter().map(|p| (p.value, p.vector.clone())).collect()))
}

impl EigenBasis {
    pub fn from_parts(
        values: Vec<f64>,
        functions: Vec<Vec<f64>>,
        weight: Weight,
        mass: Arc<SparseSymmetricMatrix>,
    ) -> Result<Self> {
        if values.len() != functions.len() {
            return Err(invalid("eigenvalue and eigenfunction counts differ"));
        }
        if functions.iter().any(|f| f.len() != mass.dim()) {
            return Err(invalid("eigenfunction length differs from node count"));
        }
        Ok(Self { values, functions, weight, mass })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn functions(&self) -> &[Vec<f64>] {
        &self.functions
    }

    pub fn function(&self, j: usize) -> &[f64] {
        &self.functions[j]
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn mass(&self) -> &SparseSymmetricMatrix {
        &self.mass
    }

    pub fn mass_arc(&self) -> Arc<SparseSymmetricMatrix> {
        Arc::clone(&self.mass)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps only the first `count` pairs.
    pub fn truncated(&self, count: usize) -> Self {
        let count = count.min(self.len());
        Self {
            values: self.values[..count].to_vec(),
            functions: self.functions[..count].to_vec(),
            weight: self.weight,
            mass: Arc::clone(&self.mass),
        }
    }

    /// L2 inner products `<f, phi_j>` of a nodal field with every member.
    pub fn project(&self, nodal: &[f64]) -> Vec<f64> {
        let mf = self.mass.mul_vec(nodal);
        self.functions.iter().map(|phi| dot(phi, &mf)).collect()
    }

    /// Nodal values of `sum_j coeffs[j] phi_j`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mass.dim()];
        for (c, phi) in coeffs.iter().zip(&self.functions) {
            axpy(*c, phi, &mut out);
        }
        out
    }

    pub fn to_nodal(&self, field: &Field) -> Result<Field> {
        match field.basis {
            crate::fem::BasisKind::FemNodal => Ok(field.clone()),
            crate::fem::BasisKind::LaplacianEigen => {
                if field.len() != self.len() {
                    return Err(invalid("eigen field size differs from the basis size"));
                }
                Ok(Field::nodal(self.synthesize(&field.coeffs)))
            }
        }
    }

    /// Largest deviation of the Gram matrix `Phi^T M Phi` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mphi: Vec<Vec<f64>> = self.functions.par_iter().map(|f| self.mass.mul_vec(f)).collect();
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let g = dot(&self.functions[i], &mphi[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Largest relative residual `|K phi - l M phi| / (l |M phi|)` against a
    /// full (unreduced) stiffness matrix, measured on interior rows.
    pub fn max_residual(&self, stiffness: &SparseSymmetricMatrix, boundary: &[bool]) -> f64 {
        self.functions
            .par_iter()
            .zip(&self.values)
            .map(|(phi, &l)| {
                let kp = stiffness.mul_vec(phi);
                let mp = self.mass.mul_vec(phi);
                let (mut r, mut s) = (0.0, 0.0);
                for i in 0..phi.len() {
                    if !boundary[i] {
                        r += (kp[i] - l * mp[i]).powi(2);
                        s += mp[i].powi(2);
                    }
                }
                r.sqrt() / (l * s.sqrt())
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Writes `eigenvalues.csv` and one field file per eigenfunction.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("eigenvalues.csv"))?);
        writeln!(w, "# weight={}", self.weight.tag())?;
        writeln!(w, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{:.16e}", i + 1, v)?;
        }
        w.flush()?;
        for (i, f) in self.functions.iter().enumerate() {
            let file = BufWriter::new(fs::File::create(dir.join(format!("eigenfunction_{:04}.field", i + 1)))?);
            Field::nodal(f.clone()).write_to(file)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path, mesh: &Mesh) -> Result<Self> {
        let r = BufReader::new(fs::File::open(dir.join("eigenvalues.csv"))?);
        let mut weight = Weight::Laplacian;
        let mut values = Vec::new();
        for line in r.lines() {
            let line = line?;
            if let Some(tag) = line.strip_prefix("# weight=") {
                weight = match tag.trim() {
                    "laplacian" => Weight::Laplacian,
                    "weighted-by-c" => Weight::WeightedByC,
                    other => return Err(Error::Parse(format!("unknown weight tag '{other}'"))),
                };
                continue;
            }
            if line.starts_with('#') || line.starts_with("index") || line.trim().is_empty() {
                continue;
            }
            let (_, v) = line.split_once(',').ok_or_else(|| Error::Parse(format!("bad line '{line}'")))?;
            values.push(v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value '{v}'")))?);
        }
        let mut functions = Vec::with_capacity(values.len());
        for i in 0..values.len() {
            let f = Field::read_from(BufReader::new(fs::File::open(
                dir.join(format!("eigenfunction_{:04}.field", i + 1)),
            )?))?;
            functions.push(f.coeffs);
        }
        Self::from_parts(values, functions, weight, Arc::new(assemble_mass(mesh)))
    }
}

/// Truncated spectral evaluation of `|div(c grad psi)|_2^2`.
#[derive(Debug, Clone)]
pub struct AsymptoticVariance {
    pub value: f64,
    /// Share of `value` contributed by the last tenth of the terms.
    pub tail_fraction: f64,
    pub terms: usize,
}

/// `sum_k eta_k^2 <psi, xi_k>^2` over a weighted eigenbasis.
pub fn asymptotic_variance(psi: &[f64], basis: &EigenBasis) -> Result<AsymptoticVariance> {
    if basis.is_empty() {
        return Err(invalid("asymptotic variance needs a non-empty eigenbasis"));
    }
    if basis.weight() != Weight::WeightedByC {
        return Err(invalid("asymptotic variance needs the c-weighted eigenbasis"));
    }
    if psi.len() != basis.mass().dim() {
        return Err(invalid("test function length differs from node count"));
    }
    let coeffs = basis.project(psi);
    let terms: Vec<f64> =
        coeffs.iter().zip(basis.values()).map(|(a, eta)| (eta * a).powi(2)).collect();
    let value: f64 = terms.iter().sum();
    let tail_start = terms.len() - terms.len().div_ceil(10);
    let tail: f64 = terms[tail_start..].iter().sum();
    let tail_fraction = if value > 0.0 { tail / value } else { 0.0 };
    Ok(AsymptoticVariance { value, tail_fraction, terms: terms.len() })
}
