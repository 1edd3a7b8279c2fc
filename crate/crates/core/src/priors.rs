//! Gaussian prior covariances: a diagonal series prior over a Laplacian
//! eigenbasis and a dense Matérn prior over nodal values.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::mesh::Point;
use crate::special::bessel_k;
use crate::spectral::EigenBasis;

/// Diagonal jitter added to Matérn matrices before factorization.
pub const MATERN_JITTER: f64 = 1e-10;

/// Matérn correlation `2^(1-a)/Gamma(a) z^a K_a(z)`, `z = r sqrt(2a) / ell`.
pub fn matern_kernel(r: f64, alpha: f64, ell: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(invalid(format!("distance must be finite and non-negative, got {r}")));
    }
    check_hyper(alpha, ell)?;
    Ok(matern_unchecked(r, alpha, ell))
}

fn check_hyper(alpha: f64, ell: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("smoothness must be positive, got {alpha}")));
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(invalid(format!("length scale must be positive, got {ell}")));
    }
    Ok(())
}

fn matern_unchecked(r: f64, alpha: f64, ell: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let z = r * (2.0 * alpha).sqrt() / ell;
    let k = bessel_k(alpha, z);
    if k == 0.0 {
        return 0.0;
    }
    if !k.is_finite() {
        return 1.0;
    }
    // Work in logs: z^a and K_a(z) over/underflow separately for large a.
    let log = (1.0 - alpha) * std::f64::consts::LN_2 - ln_gamma(alpha) + alpha * z.ln() + k.ln();
    log.exp().min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    SeriesDiagonal { alpha: f64 },
    MaternDense { alpha: f64, ell: f64 },
}

#[derive(Debug, Clone)]
pub enum CovarianceMatrix {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct PriorCovariance {
    kind: PriorKind,
    matrix: CovarianceMatrix,
    basis: Option<Arc<EigenBasis>>,
}

/// Lower-triangular square root `L` with `L L^T` equal to the (jittered) covariance.
#[derive(Debug, Clone)]
pub enum PriorFactor {
    Diagonal(Vec<f64>),
    Lower(DMatrix<f64>),
}

impl PriorFactor {
    pub fn dim(&self) -> usize {
        match self {
            PriorFactor::Diagonal(d) => d.len(),
            PriorFactor::Lower(l) => l.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            PriorFactor::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            PriorFactor::Lower(l) => l.clone(),
        }
    }

    /// `L z`
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        match self {
            PriorFactor::Diagonal(d) => d.iter().zip(z).map(|(a, b)| a * b).collect(),
            PriorFactor::Lower(l) => {
                let mut out = vec![0.0; l.nrows()];
                for j in 0..l.ncols() {
                    let zj = z[j];
                    if zj == 0.0 {
                        continue;
                    }
                    for i in j..l.nrows() {
                        out[i] += l[(i, j)] * zj;
                    }
                }
                out
            }
        }
    }

    /// `G L` for a dense `G` with one column per prior coordinate.
    pub fn right_multiply(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            PriorFactor::Diagonal(d) => {
                let mut out = g.clone();
                for (j, s) in d.iter().enumerate() {
                    out.column_mut(j).scale_mut(*s);
                }
                out
            }
            PriorFactor::Lower(l) => g * l,
        }
    }
}

pub fn series_prior_covariance(basis: impl Into<Arc<EigenBasis>>, alpha: f64) -> Result<PriorCovariance> {
    let basis = basis.into();
    if basis.is_empty() {
        return Err(invalid("series prior needs a non-empty eigenbasis"));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("smoothness must be non-negative, got {alpha}")));
    }
    if basis.values().iter().any(|&l| !(l > 0.0)) {
        return Err(invalid("eigenvalues must be positive"));
    }
    let diag = basis.values().iter().map(|l| l.powf(-alpha)).collect();
    Ok(PriorCovariance {
        kind: PriorKind::SeriesDiagonal { alpha },
        matrix: CovarianceMatrix::Diagonal(diag),
        basis: Some(basis),
    })
}

/// Diagonal prior from explicit variances, mainly for small analytic checks.
pub fn diagonal_prior(variances: Vec<f64>) -> Result<PriorCovariance> {
    if variances.is_empty() || variances.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("variances must be finite and non-negative"));
    }
    Ok(PriorCovariance {
        kind: PriorKind::SeriesDiagonal { alpha: 0.0 },
        matrix: CovarianceMatrix::Diagonal(variances),
        basis: None,
    })
}

/// Dense prior from an explicit symmetric matrix.
pub fn dense_prior(matrix: DMatrix<f64>) -> Result<PriorCovariance> {
    if !matrix.is_square() || matrix.nrows() == 0 {
        return Err(invalid("covariance must be a non-empty square matrix"));
    }
    let scale = matrix.amax().max(f64::MIN_POSITIVE);
    if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
        return Err(invalid("covariance must be symmetric"));
    }
    Ok(PriorCovariance {
        kind: PriorKind::MaternDense { alpha: f64::NAN, ell: f64::NAN },
        matrix: CovarianceMatrix::Dense(matrix),
        basis: None,
    })
}

pub fn matern_covariance_matrix(nodes: &[Point], alpha: f64, ell: f64) -> Result<PriorCovariance> {
    check_hyper(alpha, ell)?;
    if nodes.is_empty() {
        return Err(invalid("Matérn covariance needs at least one node"));
    }
    let m = nodes.len();
    let mut c = DMatrix::identity(m, m);
    for i in 0..m {
        for j in 0..i {
            let r = ((nodes[i][0] - nodes[j][0]).powi(2) + (nodes[i][1] - nodes[j][1]).powi(2)).sqrt();
            if r == 0.0 {
                return Err(invalid(format!("nodes {j} and {i} coincide")));
            }
            let k = matern_unchecked(r, alpha, ell);
            c[(i, j)] = k;
            c[(j, i)] = k;
        }
    }
    Ok(PriorCovariance {
        kind: PriorKind::MaternDense { alpha, ell },
        matrix: CovarianceMatrix::Dense(c),
        basis: None,
    })
}

impl PriorCovariance {
    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn matrix(&self) -> &CovarianceMatrix {
        &self.matrix
    }

    pub fn basis(&self) -> Option<&Arc<EigenBasis>> {
        self.basis.as_ref()
    }

    pub fn dim(&self) -> usize {
        match &self.matrix {
            CovarianceMatrix::Diagonal(d) => d.len(),
            CovarianceMatrix::Dense(c) => c.nrows(),
        }
    }

    /// Covariance as a dense matrix, without jitter.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.matrix {
            CovarianceMatrix::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            CovarianceMatrix::Dense(c) => c.clone(),
        }
    }

    /// Trace, i.e. the expected squared Euclidean norm of a draw.
    pub fn trace(&self) -> f64 {
        match &self.matrix {
            CovarianceMatrix::Diagonal(d) => d.iter().sum(),
            CovarianceMatrix::Dense(c) => c.diagonal().sum(),
        }
    }

    /// `v^T C v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        match &self.matrix {
            CovarianceMatrix::Diagonal(d) => d.iter().zip(v).map(|(a, x)| a * x * x).sum(),
            CovarianceMatrix::Dense(c) => {
                let x = nalgebra::DVector::from_column_slice(v);
                (x.transpose() * c * &x)[0]
            }
        }
    }

    /// Symmetric factor; dense matrices get `MATERN_JITTER` on the diagonal first.
    pub fn factor(&self) -> Result<PriorFactor> {
        match &self.matrix {
            CovarianceMatrix::Diagonal(d) => Ok(PriorFactor::Diagonal(d.iter().map(|x| x.sqrt()).collect())),
            CovarianceMatrix::Dense(c) => {
                let mut jittered = c.clone();
                for i in 0..jittered.nrows() {
                    jittered[(i, i)] += MATERN_JITTER;
                }
                match jittered.clone().cholesky() {
                    Some(ch) => Ok(PriorFactor::Lower(ch.l())),
                    None => {
                        let smallest = SymmetricEigen::new(jittered).eigenvalues.min();
                        Err(Error::NumericalFailure(format!(
                            "prior covariance is not positive definite after jitter (smallest eigenvalue {smallest:.3e})"
                        )))
                    }
                }
            }
        }
    }
}

/// `count` independent draws from `N(0, cov)`.
pub fn sample_prior(cov: &PriorCovariance, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let factor = cov.factor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = cov.dim();
    Ok((0..count)
        .map(|_| {
            let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            factor.apply(&z)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Closed forms at half-integer smoothness.
    fn matern_half(r: f64, ell: f64) -> f64 {
        (-r / ell).exp()
    }

    fn matern_three_halves(r: f64, ell: f64) -> f64 {
        let s = 3f64.sqrt() * r / ell;
        (1.0 + s) * (-s).exp()
    }

    fn matern_five_halves(r: f64, ell: f64) -> f64 {
        let s = 5f64.sqrt() * r / ell;
        (1.0 + s + s * s / 3.0) * (-s).exp()
    }

    #[test]
    fn kernel_closed_forms() {
        assert_eq!(matern_kernel(0.0, 2.3, 0.7).unwrap(), 1.0);
        assert!((matern_kernel(1.0, 0.5, 1.0).unwrap() - 0.36787944117144233).abs() < 1e-12);
        assert!((matern_kernel(1.0, 1.5, 1.0).unwrap() - 0.4833577245965077).abs() < 1e-12);
        for i in 1..=100 {
            let r = 0.03 * i as f64;
            for ell in [0.25, 1.0, 3.0] {
                assert!((matern_kernel(r, 0.5, ell).unwrap() - matern_half(r, ell)).abs() < 1e-12);
                assert!((matern_kernel(r, 1.5, ell).unwrap() - matern_three_halves(r, ell)).abs() < 1e-12);
                assert!((matern_kernel(r, 2.5, ell).unwrap() - matern_five_halves(r, ell)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_monotone_and_rescalable() {
        for alpha in [0.5, 1.0, 3.7, 10.0, 15.0] {
            let mut prev = 1.0;
            for i in 0..100 {
                let r = 0.02 * i as f64;
                let k = matern_kernel(r, alpha, 0.4).unwrap();
                assert!(k <= prev + 1e-15, "alpha {alpha} r {r}");
                assert!((k - matern_kernel(r / 0.4, alpha, 1.0).unwrap()).abs() < 1e-12);
                prev = k;
            }
        }
    }

    #[test]
    fn kernel_rejects_bad_arguments() {
        assert!(matern_kernel(-1.0, 1.0, 1.0).is_err());
        assert!(matern_kernel(1.0, 0.0, 1.0).is_err());
        assert!(matern_kernel(1.0, 1.0, -2.0).is_err());
        assert!(matern_kernel(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn kernel_near_zero_distance_is_continuous() {
        let k = matern_kernel(1e-9, 10.0, 0.25).unwrap();
        assert!(k <= 1.0 && k > 1.0 - 1e-6);
    }

    #[test]
    fn small_matern_matrices() {
        let one = matern_covariance_matrix(&[[0.3, 0.1]], 2.0, 0.5).unwrap();
        assert_eq!(one.to_dense(), DMatrix::from_element(1, 1, 1.0));
        let two = matern_covariance_matrix(&[[0.0, 0.0], [1.0, 0.0]], 0.5, 1.0).unwrap().to_dense();
        let e = (-1.0f64).exp();
        assert!((two[(0, 1)] - e).abs() < 1e-12 && (two[(1, 0)] - e).abs() < 1e-12);
        assert_eq!(two[(0, 0)], 1.0);
        assert!(matern_covariance_matrix(&[[0.0, 0.0], [0.0, 0.0]], 1.0, 1.0).is_err());
    }

    #[test]
    fn dense_factor_reconstructs() {
        let nodes: Vec<Point> = (0..40).map(|i| [(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]).collect();
        let cov = matern_covariance_matrix(&nodes, 2.5, 0.5).unwrap();
        let l = cov.factor().unwrap().to_dense();
        let diff = &l * l.transpose() - cov.to_dense();
        assert!(diff.amax() < 1e-8);
    }

    #[test]
    fn diagonal_sampling_matches_variances() {
        let cov = diagonal_prior(vec![1.0, 0.25, 0.04]).unwrap();
        let draws = sample_prior(&cov, 100_000, 7).unwrap();
        for (j, v) in [1.0, 0.25, 0.04].iter().enumerate() {
            let s: f64 = draws.iter().map(|d| d[j] * d[j]).sum::<f64>() / draws.len() as f64;
            assert!((s - v).abs() < 0.05 * v, "coordinate {j}: {s} vs {v}");
        }
        assert_eq!(sample_prior(&cov, 3, 1).unwrap(), sample_prior(&cov, 3, 1).unwrap());
        assert!(sample_prior(&cov, 0, 1).is_err());
    }
}
