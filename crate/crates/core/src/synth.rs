//! Test problems, synthetic data, L2 norms and the difference-based noise
//! estimator.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::fem::{BasisKind, Field, ForwardSolver};
use crate::mesh::{Mesh, Point};
use crate::sparse::SparseSymmetricMatrix;
use crate::spectral::EigenBasis;

/// Source with a doubled bump at (0.5, 0) and an elongated bump at the origin.
pub fn default_truth(p: Point) -> f64 {
    let [x, y] = p;
    let a = (-(5.0 * x - 2.5).powi(2) - (5.0 * y).powi(2)).exp();
    let b = (-(7.5 * x).powi(2) - (2.5 * y).powi(2)).exp();
    a + b + a
}

/// Three bumps centred at (-0.5, 0), (0, 0) and (0, 0.5).
pub fn three_source_truth(p: Point) -> f64 {
    let [x, y] = p;
    (-(5.0 * x + 2.5).powi(2) - (5.0 * y).powi(2)).exp()
        + (-(7.5 * x).powi(2) - (2.5 * y).powi(2)).exp()
        + (-(5.0 * x).powi(2) - (5.0 * y - 2.5).powi(2)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthVariant {
    /// [`default_truth`]
    Printed,
    /// [`three_source_truth`]
    #[default]
    ThreeSources,
}

impl TruthVariant {
    pub fn eval(self, p: Point) -> f64 {
        match self {
            TruthVariant::Printed => default_truth(p),
            TruthVariant::ThreeSources => three_source_truth(p),
        }
    }

    pub fn field(self, mesh: &Mesh) -> Field {
        Field::from_fn(mesh, |p| self.eval(p))
    }
}

/// `2 + 5 exp(-|5x - (2,2)|^2) + 5 exp(-|5x + (2,2)|^2)`
pub fn default_diffusivity(p: Point) -> f64 {
    let [x, y] = p;
    2.0 + 5.0 * (-(5.0 * x - 2.0).powi(2) - (5.0 * y - 2.0).powi(2)).exp()
        + 5.0 * (-(5.0 * x + 2.0).powi(2) - (5.0 * y + 2.0).powi(2)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The observations at the given positions, in that order.
    pub fn select(&self, idx: &[usize]) -> ObservationSet {
        ObservationSet {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            sigma: self.sigma,
            seed: self.seed,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(s) = self.sigma {
            writeln!(w, "# sigma={s:e}")?;
        }
        if let Some(s) = self.seed {
            writeln!(w, "# seed={s}")?;
        }
        writeln!(w, "x,y,Y")?;
        for (p, v) in self.points.iter().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut out = ObservationSet { points: Vec::new(), values: Vec::new(), sigma: None, seed: None };
        let bad = |s: &str| Error::Parse(format!("bad observation line '{s}'"));
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                match rest.trim().split_once('=') {
                    Some(("sigma", v)) => out.sigma = Some(v.parse().map_err(|_| bad(line))?),
                    Some(("seed", v)) => out.seed = Some(v.parse().map_err(|_| bad(line))?),
                    _ => {}
                }
                continue;
            }
            if line.is_empty() || line.starts_with('x') {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad(line)))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(bad(line));
            }
            out.points.push([v[0], v[1]]);
            out.values.push(v[2]);
        }
        Ok(out)
    }
}

/// Adds `sigma` times standard normal noise from `rng` to every entry.
pub fn add_noise(clean: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    clean
        .iter()
        .map(|u| {
            let w: f64 = rng.sample(StandardNormal);
            u + sigma * w
        })
        .collect()
}

/// Noisy nodal values of the forward solution at every mesh node.
pub fn generate_observations(
    mesh: &Mesh,
    c: impl Fn(Point) -> f64,
    f: &Field,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("noise level must be non-negative, got {sigma}")));
    }
    if f.basis != BasisKind::FemNodal {
        return Err(invalid("observations are generated from a nodal source field"));
    }
    let u = ForwardSolver::new(mesh, c)?.solve(f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ObservationSet {
        points: mesh.nodes().to_vec(),
        values: add_noise(&u.coeffs, sigma, &mut rng),
        sigma: Some(sigma),
        seed: Some(seed),
    })
}

/// L2 norm: via the mass matrix for nodal fields, by Parseval for eigen fields.
pub fn l2_norm(field: &Field, mass: &SparseSymmetricMatrix) -> Result<f64> {
    match field.basis {
        BasisKind::LaplacianEigen => Ok(field.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()),
        BasisKind::FemNodal => {
            if field.len() != mass.dim() {
                return Err(invalid("nodal field length differs from the mesh size"));
            }
            Ok(mass.quad_form(&field.coeffs).max(0.0).sqrt())
        }
    }
}

pub fn l2_error(f1: &Field, f2: &Field, mass: &SparseSymmetricMatrix) -> Result<f64> {
    if f1.basis != f2.basis || f1.len() != f2.len() {
        return Err(invalid("fields live in different bases"));
    }
    let diff = f1.coeffs.iter().zip(&f2.coeffs).map(|(a, b)| a - b).collect();
    l2_norm(&Field { basis: f1.basis, coeffs: diff }, mass)
}

/// Distance from a nodal field to the span of `basis`.
pub fn projection_error(f0_nodal: &Field, basis: &EigenBasis) -> Result<f64> {
    if f0_nodal.basis != BasisKind::FemNodal || f0_nodal.len() != basis.mass().dim() {
        return Err(invalid("projection needs a nodal field on the basis mesh"));
    }
    let proj = basis.synthesize(&basis.project(&f0_nodal.coeffs));
    let resid = Field::nodal(f0_nodal.coeffs.iter().zip(&proj).map(|(a, b)| a - b).collect());
    l2_norm(&resid, basis.mass())
}

/// `sqrt( sum (Y_i - Y_{i-1})^2 / (2 (n - 1)) )` in the given order.
pub fn rice_sigma_hat(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(invalid("the difference estimator needs at least two observations"));
    }
    let s: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((s / (2.0 * (y.len() - 1) as f64)).sqrt())
}

/// Greedy nearest-neighbour path through `points` starting at the first one.
pub fn nearest_neighbor_order(points: &[Point]) -> Vec<usize> {
    let n = points.len();
    let mut order = Vec::with_capacity(n);
    if n == 0 {
        return order;
    }
    let mut used = vec![false; n];
    let mut cur = 0;
    used[0] = true;
    order.push(0);
    for _ in 1..n {
        let p = points[cur];
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (i, q) in points.iter().enumerate() {
            if !used[i] {
                let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
        }
        used[best] = true;
        order.push(best);
        cur = best;
    }
    order
}

/// `n` distinct indices out of `0..total`, sorted. Depends only on
/// `(seed, total)` and `n`, and the sets are nested in `n`.
pub fn subsample_indices(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 || n > total {
        return Err(invalid(format!("cannot draw {n} of {total} observation points")));
    }
    let mut perm: Vec<usize> = (0..total).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut idx = perm[..n].to_vec();
    idx.sort_unstable();
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_mass;
    use crate::mesh::{build_ellipse_mesh, Ellipse};

    #[test]
    fn truth_point_values() {
        assert!((default_truth([0.5, 0.0]) - (2.0 + (-14.0625f64).exp())).abs() < 1e-15);
        assert!((default_truth([0.0, 0.0]) - 1.0038609082724554).abs() < 1e-14);
        assert!((three_source_truth([0.0, 0.5]) - (1.0 + (-1.5625f64).exp() + (-12.5f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn diffusivity_point_values() {
        assert!((default_diffusivity([0.4, 0.4]) - (7.0 + 5.0 * (-32.0f64).exp())).abs() < 1e-14);
        assert!((default_diffusivity([0.0, 0.0]) - (2.0 + 10.0 * (-8.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn norms() {
        let mesh = build_ellipse_mesh(1.0, 0.75, std::f64::consts::FRAC_PI_6, 0.05).unwrap();
        let mass = assemble_mass(&mesh);
        let one = Field::from_fn(&mesh, |_| 1.0);
        let area = Ellipse::standard().area();
        assert!((l2_norm(&one, &mass).unwrap() - area.sqrt()).abs() < 0.01 * area.sqrt());
        assert_eq!(l2_norm(&Field::nodal(vec![0.0; mesh.node_count()]), &mass).unwrap(), 0.0);
        assert!((l2_norm(&Field::eigen(vec![3.0, 4.0]), &mass).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(l2_error(&one, &one, &mass).unwrap(), 0.0);
        assert!(l2_error(&one, &Field::eigen(vec![1.0]), &mass).is_err());
    }

    #[test]
    fn rice_estimator() {
        assert_eq!(rice_sigma_hat(&[3.0; 10]).unwrap(), 0.0);
        assert!((rice_sigma_hat(&[0.0, 1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(rice_sigma_hat(&[1.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mean = 0.0;
        for _ in 0..100 {
            let y = add_noise(&vec![0.0; 4500], 0.3, &mut rng);
            mean += rice_sigma_hat(&y).unwrap() / 100.0;
        }
        assert!((mean - 0.3).abs() < 0.05 * 0.3);
    }

    #[test]
    fn subsampling_is_nested_and_deterministic() {
        let a = subsample_indices(1000, 50, 9).unwrap();
        let b = subsample_indices(1000, 100, 9).unwrap();
        assert!(a.iter().all(|i| b.binary_search(i).is_ok()));
        assert_eq!(a, subsample_indices(1000, 50, 9).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(subsample_indices(10, 11, 0).is_err());
    }

    #[test]
    fn nearest_neighbor_path_visits_everything_once() {
        let pts: Vec<Point> = (0..50).map(|i| [(i as f64).sin(), (i as f64 * 1.3).cos()]).collect();
        let mut order = nearest_neighbor_order(&pts);
        assert_eq!(order[0], 0);
        order.sort_unstable();
        assert_eq!(order, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn noiseless_observations_are_the_solution() {
        let mesh = build_ellipse_mesh(1.0, 0.75, 0.5, 0.1).unwrap();
        let f = Field::from_fn(&mesh, default_truth);
        let obs = generate_observations(&mesh, default_diffusivity, &f, 0.0, 3).unwrap();
        let u = ForwardSolver::new(&mesh, default_diffusivity).unwrap().solve(&f).unwrap();
        assert_eq!(obs.values, u.coeffs);
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let back = ObservationSet::read_csv(&buf[..]).unwrap();
        assert_eq!(back, obs);
    }
}
