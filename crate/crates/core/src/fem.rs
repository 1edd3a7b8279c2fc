//! P1 finite elements for `div(c grad u) = f` with zero Dirichlet data.
//!
//! Sign convention: the PDE is read as `div(c grad u) - f = 0`, so the
//! discrete system on interior nodes is `K_c u = -M f`. Positive sources give
//! negative solutions.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::{SparseCholesky, SparseSymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Nodal values against P1 hat functions.
    FemNodal,
    /// Coefficients against L2-orthonormal Laplacian eigenfunctions.
    LaplacianEigen,
}

impl BasisKind {
    pub fn tag(self) -> &'static str {
        match self {
            BasisKind::FemNodal => "fem-nodal",
            BasisKind::LaplacianEigen => "laplacian-eigen",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "fem-nodal" => Ok(BasisKind::FemNodal),
            "laplacian-eigen" => Ok(BasisKind::LaplacianEigen),
            other => Err(Error::Parse(format!("unknown basis tag '{other}'"))),
        }
    }
}

/// A function on the domain as coefficients against a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub basis: BasisKind,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn nodal(values: Vec<f64>) -> Self {
        Self { basis: BasisKind::FemNodal, coeffs: values }
    }

    pub fn eigen(coeffs: Vec<f64>) -> Self {
        Self { basis: BasisKind::LaplacianEigen, coeffs }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        Self::nodal(mesh.nodes().iter().map(|&p| f(p)).collect())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "field basis={} size={}", self.basis.tag(), self.coeffs.len())?;
        for v in &self.coeffs {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
        let mut basis = None;
        let mut size = None;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("field") {
            return Err(Error::Parse(format!("bad field header: {header}")));
        }
        for kv in parts {
            match kv.split_once('=') {
                Some(("basis", t)) => basis = Some(BasisKind::from_tag(t)?),
                Some(("size", s)) => {
                    size = Some(s.parse::<usize>().map_err(|_| Error::Parse(format!("bad size '{s}'")))?)
                }
                _ => return Err(Error::Parse(format!("bad field header entry '{kv}'"))),
            }
        }
        let (basis, size) = match (basis, size) {
            (Some(b), Some(s)) => (b, s),
            _ => return Err(Error::Parse(format!("incomplete field header: {header}"))),
        };
        let mut coeffs = Vec::with_capacity(size);
        for line in lines.take(size) {
            let line = line?;
            coeffs.push(line.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value '{line}'")))?);
        }
        if coeffs.len() != size {
            return Err(Error::Parse(format!("expected {size} values, found {}", coeffs.len())));
        }
        Ok(Self { basis, coeffs })
    }
}

/// Gradients of the three hat functions on a triangle, and its area.
fn hat_gradients(v: &[Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        g[i] = [(v[j][1] - v[k][1]) / area2, (v[k][0] - v[j][0]) / area2];
    }
    (g, 0.5 * area2)
}

/// Element stiffness with a constant coefficient `c`.
pub fn local_stiffness(v: &[Point; 3], c: f64) -> [[f64; 3]; 3] {
    let (g, area) = hat_gradients(v);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = c * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

pub fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Stiffness matrix over all nodes (no boundary conditions applied), with
/// `c` sampled at element centroids.
pub fn assemble_stiffness(mesh: &Mesh, c: impl Fn(Point) -> f64) -> Result<SparseSymmetricMatrix> {
    let mut t = Vec::with_capacity(9 * mesh.element_count());
    for (k, e) in mesh.elements().iter().enumerate() {
        let v = mesh.element_vertices(k);
        let centroid = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
        let ck = c(centroid);
        if !(ck > 0.0) || !ck.is_finite() {
            return Err(Error::InvalidCoefficient { value: ck, x: centroid[0], y: centroid[1] });
        }
        let local = local_stiffness(&v, ck);
        for i in 0..3 {
            for j in 0..3 {
                t.push((e[i], e[j], local[i][j]));
            }
        }
    }
    Ok(SparseSymmetricMatrix::from_triplets(mesh.node_count(), &t))
}

pub fn assemble_mass(mesh: &Mesh) -> SparseSymmetricMatrix {
    let mut t = Vec::with_capacity(9 * mesh.element_count());
    for (k, e) in mesh.elements().iter().enumerate() {
        let local = local_mass(mesh.element_area(k));
        for i in 0..3 {
            for j in 0..3 {
                t.push((e[i], e[j], local[i][j]));
            }
        }
    }
    SparseSymmetricMatrix::from_triplets(mesh.node_count(), &t)
}

/// Factorized forward problem on one mesh and diffusivity.
///
/// The factorization is immutable, so solves for many right-hand sides can
/// run concurrently.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    node_count: usize,
    interior: Vec<usize>,
    mass: SparseSymmetricMatrix,
    stiffness: SparseSymmetricMatrix,
    reduced_stiffness: SparseSymmetricMatrix,
    chol: SparseCholesky,
}

impl ForwardSolver {
    pub fn new(mesh: &Mesh, c: impl Fn(Point) -> f64) -> Result<Self> {
        let stiffness = assemble_stiffness(mesh, c)?;
        let mass = assemble_mass(mesh);
        let interior = mesh.interior_nodes();
        if interior.is_empty() {
            return Err(invalid("mesh has no interior nodes"));
        }
        let reduced_stiffness = stiffness.submatrix(&interior);
        let chol = SparseCholesky::new(&reduced_stiffness)?;
        Ok(Self { node_count: mesh.node_count(), interior, mass, stiffness, reduced_stiffness, chol })
    }

    pub fn mass(&self) -> &SparseSymmetricMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseSymmetricMatrix {
        &self.stiffness
    }

    pub fn reduced_stiffness(&self) -> &SparseSymmetricMatrix {
        &self.reduced_stiffness
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Solves for nodal source values `f`; the result vanishes on the boundary.
    pub fn solve_nodal(&self, f: &[f64]) -> Vec<f64> {
        let mf = self.mass.mul_vec(f);
        let rhs: Vec<f64> = self.interior.iter().map(|&i| -mf[i]).collect();
        let ui = self.chol.solve(&rhs);
        let mut u = vec![0.0; self.node_count];
        for (&i, v) in self.interior.iter().zip(ui) {
            u[i] = v;
        }
        u
    }

    pub fn solve(&self, f: &Field) -> Result<Field> {
        if f.basis != BasisKind::FemNodal {
            return Err(invalid("forward solves take nodal fields; synthesize eigen fields first"));
        }
        if f.len() != self.node_count {
            return Err(invalid(format!("field has {} values, mesh has {} nodes", f.len(), self.node_count)));
        }
        Ok(Field::nodal(self.solve_nodal(&f.coeffs)))
    }

    /// Relative residual `|K_c u + M f| / |M f|` on interior rows.
    pub fn relative_residual(&self, f: &[f64], u: &[f64]) -> f64 {
        let ku = self.stiffness.mul_vec(u);
        let mf = self.mass.mul_vec(f);
        let (mut r, mut b) = (0.0, 0.0);
        for &i in &self.interior {
            r += (ku[i] + mf[i]).powi(2);
            b += mf[i].powi(2);
        }
        if b == 0.0 {
            r.sqrt()
        } else {
            (r / b).sqrt()
        }
    }

    /// Discrete `|div(c grad psi)|_2^2` for a nodal field vanishing on the
    /// boundary: `psi^T K M^{-1} K psi` on interior nodes.
    pub fn operator_norm_sq(&self, psi: &[f64]) -> Result<f64> {
        let m_int = self.mass.submatrix(&self.interior);
        let mchol = SparseCholesky::new(&m_int)?;
        let kpsi = self.stiffness.mul_vec(psi);
        let r: Vec<f64> = self.interior.iter().map(|&i| kpsi[i]).collect();
        let s = mchol.solve(&r);
        Ok(r.iter().zip(&s).map(|(a, b)| a * b).sum())
    }
}

pub fn solve_forward(mesh: &Mesh, c: impl Fn(Point) -> f64, f: &Field) -> Result<Field> {
    ForwardSolver::new(mesh, c)?.solve(f)
}

/// Dense `n x J` matrix mapping basis coefficients to predicted observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardMatrix(pub DMatrix<f64>);

impl ForwardMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> ForwardMatrix {
        ForwardMatrix(self.0.select_rows(rows))
    }

    /// Row-major CSV: one line per observation, one column per basis member,
    /// no header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.0.nrows() {
            let row: Vec<String> = (0..self.0.ncols()).map(|j| format!("{:.16e}", self.0[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut data = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            match cols {
                None => cols = Some(vals.len()),
                Some(c) if c != vals.len() => return Err(Error::Parse("ragged forward matrix".into())),
                _ => {}
            }
            data.extend(vals);
            rows += 1;
        }
        Ok(ForwardMatrix(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &data)))
    }
}

impl ForwardSolver {
    /// Column `j` is the forward solution for `basis[j]` (nodal values on
    /// this mesh) evaluated at the given observation points.
    pub fn forward_matrix(
        &self,
        mesh: &Mesh,
        basis: &[Vec<f64>],
        obs_points: &[Point],
    ) -> Result<ForwardMatrix> {
        let locs = obs_points
            .iter()
            .map(|&p| mesh.locate(p).ok_or(Error::OutOfDomain(p[0], p[1])))
            .collect::<Result<Vec<_>>>()?;
        let columns: Vec<Vec<f64>> = basis
            .par_iter()
            .map(|f| {
                let u = self.solve_nodal(f);
                locs.iter().map(|l| mesh.evaluate_at(&u, l)).collect()
            })
            .collect();
        let mut g = DMatrix::zeros(obs_points.len(), basis.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                g[(i, j)] = *v;
            }
        }
        Ok(ForwardMatrix(g))
    }

    /// Forward matrix with observations at a subset of mesh nodes.
    pub fn forward_matrix_at_nodes(&self, basis: &[Vec<f64>], nodes: &[usize]) -> ForwardMatrix {
        let columns: Vec<Vec<f64>> = basis
            .par_iter()
            .map(|f| {
                let u = self.solve_nodal(f);
                nodes.iter().map(|&i| u[i]).collect()
            })
            .collect();
        let mut g = DMatrix::zeros(nodes.len(), basis.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                g[(i, j)] = *v;
            }
        }
        ForwardMatrix(g)
    }
}

pub fn build_forward_matrix(
    mesh: &Mesh,
    c: impl Fn(Point) -> f64,
    basis: &[Field],
    obs_points: &[Point],
) -> Result<ForwardMatrix> {
    let solver = ForwardSolver::new(mesh, c)?;
    let nodal = basis
        .iter()
        .map(|f| {
            if f.basis != BasisKind::FemNodal || f.len() != mesh.node_count() {
                Err(invalid("basis members must be nodal fields on the mesh"))
            } else {
                Ok(f.coeffs.clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    solver.forward_matrix(mesh, &nodal, obs_points)
}

/// Nodal values on `fine` of every hat function of `coarse`: entry `[m]` is
/// the interpolant of the `m`-th coarse hat function. Fine nodes outside the
/// coarse polygon (on the curved boundary) use the nearest coarse element.
pub fn hat_functions_on(coarse: &Mesh, fine: &Mesh) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; fine.node_count()]; coarse.node_count()];
    for (i, &p) in fine.nodes().iter().enumerate() {
        let loc = coarse.locate_nearest(p);
        let e = coarse.elements()[loc.element];
        for v in 0..3 {
            out[e[v]][i] += loc.bary[v];
        }
    }
    out
}

/// Interpolates nodal values from `coarse` onto the nodes of `fine`.
pub fn transfer_nodal(coarse: &Mesh, values: &[f64], fine: &Mesh) -> Vec<f64> {
    fine.nodes()
        .iter()
        .map(|&p| coarse.evaluate_at(values, &coarse.locate_nearest(p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_ellipse_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn right_triangle() -> Mesh {
        Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![true; 3], None)
    }

    #[test]
    fn local_stiffness_unit_right_triangle() {
        let k = assemble_stiffness(&right_triangle(), |_| 1.0).unwrap();
        // hand integration: 1/2 * [[2,-1,-1],[-1,1,0],[-1,0,1]]
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.get(i, j) - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn local_mass_unit_right_triangle() {
        let m = assemble_mass(&right_triangle());
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((m.get(i, j) - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_linear_in_c_with_zero_row_sums() {
        let mesh = build_ellipse_mesh(1.0, 0.75, 0.5, 0.15).unwrap();
        let k1 = assemble_stiffness(&mesh, |_| 1.0).unwrap();
        let k2 = assemble_stiffness(&mesh, |_| 2.0).unwrap();
        for i in 0..mesh.node_count() {
            let s: f64 = k1.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-10);
            for (j, v) in k1.row(i) {
                assert_eq!(k2.get(i, j), 2.0 * v);
            }
        }
        assert!(k1.asymmetry() < 1e-12);
    }

    #[test]
    fn nonpositive_coefficient_is_rejected() {
        let mesh = build_ellipse_mesh(1.0, 1.0, 0.0, 0.3).unwrap();
        let err = assemble_stiffness(&mesh, |p| p[0]).unwrap_err();
        assert!(matches!(err, Error::InvalidCoefficient { .. }));
    }

    #[test]
    fn mass_sums_to_area_and_is_positive() {
        let mesh = build_ellipse_mesh(1.0, 0.75, 0.3, 0.12).unwrap();
        let m = assemble_mass(&mesh);
        let total: f64 = (0..m.dim()).flat_map(|i| m.row(i).map(|(_, v)| v).collect::<Vec<_>>()).sum();
        assert!((total - mesh.area()).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(m.quad_form(&v) > 0.0);
        }
    }

    #[test]
    fn weak_form_identity() {
        let mesh = build_ellipse_mesh(1.0, 0.75, 0.3, 0.12).unwrap();
        let c = |p: Point| 1.5 + p[0] * p[0];
        let k = assemble_stiffness(&mesh, c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..mesh.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..mesh.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        // independent elementwise quadrature of int c grad u . grad v
        let mut quad = 0.0;
        for (t, e) in mesh.elements().iter().enumerate() {
            let p = mesh.element_vertices(t);
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let grad = |w: &[f64]| {
                let (d1, d2) = (w[e[1]] - w[e[0]], w[e[2]] - w[e[0]]);
                [
                    (d1 * (p[2][1] - p[0][1]) - d2 * (p[1][1] - p[0][1])) / det,
                    (d2 * (p[1][0] - p[0][0]) - d1 * (p[2][0] - p[0][0])) / det,
                ]
            };
            let (gu, gv) = (grad(&u), grad(&v));
            let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            quad += c(centroid) * 0.5 * det * (gu[0] * gv[0] + gu[1] * gv[1]);
        }
        let kv = k.mul_vec(&u);
        let form: f64 = kv.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((form - quad).abs() < 1e-10 * quad.abs().max(1.0));
    }

    #[test]
    fn zero_source_and_linearity() {
        let mesh = build_ellipse_mesh(1.0, 0.75, 0.5, 0.1).unwrap();
        let solver = ForwardSolver::new(&mesh, |p| 2.0 + p[1]).unwrap();
        let zero = solver.solve_nodal(&vec![0.0; mesh.node_count()]);
        assert!(zero.iter().all(|&v| v == 0.0));
        let f1: Vec<f64> = mesh.nodes().iter().map(|p| (3.0 * p[0]).sin()).collect();
        let f2: Vec<f64> = mesh.nodes().iter().map(|p| p[1] * p[1]).collect();
        let sum: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a + b).collect();
        let (u1, u2, us) = (solver.solve_nodal(&f1), solver.solve_nodal(&f2), solver.solve_nodal(&sum));
        for i in 0..mesh.node_count() {
            assert!((us[i] - u1[i] - u2[i]).abs() < 1e-9);
        }
        assert!(solver.relative_residual(&f1, &u1) < 1e-10);
        for (i, &b) in mesh.boundary_mask().iter().enumerate() {
            if b {
                assert_eq!(u1[i], 0.0);
            }
        }
    }

    #[test]
    fn disk_poisson_centre_value() {
        let mesh = build_ellipse_mesh(1.0, 1.0, 0.0, 0.04).unwrap();
        let u = solve_forward(&mesh, |_| 1.0, &Field::nodal(vec![1.0; mesh.node_count()])).unwrap();
        let centre = mesh.interpolate(&u.coeffs, [0.0, 0.0]).unwrap();
        assert!((centre + 0.25).abs() < 2e-3, "{centre}");
        let worst = mesh
            .nodes()
            .iter()
            .zip(&u.coeffs)
            .map(|(p, v)| (v - (p[0] * p[0] + p[1] * p[1] - 1.0) / 4.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 2e-3, "{worst}");
    }

    #[test]
    fn forward_matrix_scales_inversely_with_constant_c() {
        let mesh = build_ellipse_mesh(1.0, 0.75, 0.5, 0.12).unwrap();
        let basis: Vec<Field> = vec![
            Field::from_fn(&mesh, |p| (p[0] + 0.3).exp()),
            Field::nodal(vec![0.0; mesh.node_count()]),
        ];
        let obs = vec![[0.1, 0.1], [-0.2, 0.05], [0.3, -0.1]];
        let g1 = build_forward_matrix(&mesh, |_| 1.0, &basis, &obs).unwrap();
        let g2 = build_forward_matrix(&mesh, |_| 2.0, &basis, &obs).unwrap();
        for i in 0..3 {
            assert!((g2.0[(i, 0)] - 0.5 * g1.0[(i, 0)]).abs() < 1e-9);
            assert_eq!(g1.0[(i, 1)], 0.0);
        }
        let outside = build_forward_matrix(&mesh, |_| 1.0, &basis, &[[3.0, 0.0]]);
        assert!(matches!(outside, Err(Error::OutOfDomain(..))));
    }

    #[test]
    fn forward_map_is_self_adjoint_in_mass_inner_product() {
        let mesh = build_ellipse_mesh(1.0, 0.75, 0.5, 0.15).unwrap();
        let solver = ForwardSolver::new(&mesh, |p| 2.0 + p[0].sin()).unwrap();
        let n = mesh.node_count();
        let basis: Vec<Vec<f64>> = (0..n).map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        }).collect();
        let all: Vec<usize> = (0..n).collect();
        let g = solver.forward_matrix_at_nodes(&basis, &all).0;
        let mg = solver.mass().to_dense() * &g;
        let asym = (&mg - mg.transpose()).abs().max();
        assert!(asym < 1e-8 * mg.abs().max().max(1e-300), "{asym}");
    }

    #[test]
    fn field_file_round_trip() {
        let f = Field::eigen(vec![1.0, -2.5e-7, std::f64::consts::PI]);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("field basis=laplacian-eigen size=3\n"));
        assert_eq!(Field::read_from(&buf[..]).unwrap(), f);
        assert!(Field::read_from(&b"field basis=other size=1\n1\n"[..]).is_err());
        assert!(Field::read_from(&b"field basis=fem-nodal size=2\n1\n"[..]).is_err());
    }

    #[test]
    fn forward_matrix_csv_round_trip() {
        let g = ForwardMatrix(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -4.0, 5.5e-9, 6.0]));
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(ForwardMatrix::read_csv(&buf[..]).unwrap(), g);
    }
}
