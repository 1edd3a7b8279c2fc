//! Conjugate Gaussian posteriors for linear observation models
//! `Y = G f + sigma W` under `f ~ N(0, C)`.
//!
//! Everything is computed in whitened coordinates `f = L z` with `L L^T = C`:
//! the precision `I + sigma^-2 (G L)^T (G L)` is well conditioned even when
//! `C` is nearly singular, and `C` is never inverted.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::fem::{Field, ForwardMatrix};
use crate::priors::{CovarianceMatrix, PriorCovariance, MATERN_JITTER};
use crate::sparse::SparseSymmetricMatrix;
use crate::spectral::EigenBasis;

/// What the coefficient vector of a posterior refers to.
#[derive(Debug, Clone)]
pub enum PosteriorBasis {
    /// Coefficients against L2-orthonormal eigenfunctions.
    Eigen(Arc<EigenBasis>),
    /// Nodal values on a mesh with the given mass matrix.
    Nodal(Arc<SparseSymmetricMatrix>),
    /// Bare coefficient vector with the Euclidean inner product.
    Coefficients,
}

#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    basis: PosteriorBasis,
    sigma: f64,
}

/// The data-independent part of a conjugate update, reusable across
/// replicated observation vectors with the same design and noise level.
#[derive(Debug, Clone)]
pub struct ConjugateSolver {
    prior_factor: DMatrix<f64>,
    whitened: DMatrix<f64>,
    precision: Cholesky<f64, Dyn>,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    basis: PosteriorBasis,
    sigma: f64,
}

impl ConjugateSolver {
    pub fn new(g: &ForwardMatrix, sigma: f64, prior: &PriorCovariance) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("noise level must be positive, got {sigma}")));
        }
        if g.cols() != prior.dim() {
            return Err(invalid(format!(
                "forward matrix has {} columns but the prior has dimension {}",
                g.cols(),
                prior.dim()
            )));
        }
        let lf = prior.factor()?;
        let whitened = lf.right_multiply(g.matrix());
        let p = prior.dim();
        let mut precision = whitened.tr_mul(&whitened) / (sigma * sigma);
        for i in 0..p {
            precision[(i, i)] += 1.0;
        }
        let precision = precision
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("posterior precision is not positive definite".into()))?;
        let l = lf.to_dense();
        let r = precision.l();
        let ft = r
            .solve_lower_triangular(&l.transpose())
            .ok_or_else(|| Error::NumericalFailure("singular precision factor".into()))?;
        let factor = ft.transpose();
        let mut covariance = &factor * &ft;
        covariance = (&covariance + covariance.transpose()) * 0.5;
        let basis = match prior.basis() {
            Some(b) => PosteriorBasis::Eigen(Arc::clone(b)),
            None => PosteriorBasis::Coefficients,
        };
        Ok(Self { prior_factor: l, whitened, precision, covariance, factor, basis, sigma })
    }

    pub fn with_basis(mut self, basis: PosteriorBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Posterior mean for one observation vector.
    pub fn mean(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.whitened.nrows() {
            return Err(invalid(format!(
                "observation vector has length {} but the forward matrix has {} rows",
                y.len(),
                self.whitened.nrows()
            )));
        }
        let y = DVector::from_column_slice(y);
        let t = self.whitened.tr_mul(&y);
        let s = self.precision.solve(&t);
        Ok(&self.prior_factor * s / (self.sigma * self.sigma))
    }

    pub fn posterior(&self, y: &[f64]) -> Result<GaussianPosterior> {
        Ok(GaussianPosterior {
            mean: self.mean(y)?,
            covariance: self.covariance.clone(),
            factor: self.factor.clone(),
            basis: self.basis.clone(),
            sigma: self.sigma,
        })
    }
}

pub fn conjugate_update(
    g: &ForwardMatrix,
    y: &[f64],
    sigma: f64,
    prior: &PriorCovariance,
) -> Result<GaussianPosterior> {
    ConjugateSolver::new(g, sigma, prior)?.posterior(y)
}

impl GaussianPosterior {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `F` with `F F^T` equal to the covariance.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn basis(&self) -> &PosteriorBasis {
        &self.basis
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn with_basis(mut self, basis: PosteriorBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn marginal_sd(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// Weights `w` such that `<f, psi> = w^T f` for coefficient vectors `f`.
    pub fn functional_weights(&self, psi: &[f64]) -> Result<Vec<f64>> {
        if psi.len() != self.dim() {
            return Err(invalid(format!("functional has length {} but the posterior has dimension {}", psi.len(), self.dim())));
        }
        Ok(match &self.basis {
            PosteriorBasis::Nodal(mass) => mass.mul_vec(psi),
            _ => psi.to_vec(),
        })
    }

    /// Largest `v^T (Sigma_post - Sigma_prior) v` over random unit directions;
    /// non-positive when the data shrank the prior in every tested direction.
    pub fn shrinkage_excess(&self, prior: &PriorCovariance, directions: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = matches!(prior.matrix(), CovarianceMatrix::Dense(_));
        (0..directions)
            .map(|_| {
                let mut v: Vec<f64> = (0..self.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= n);
                let post = (DVector::from_column_slice(&v).transpose() * &self.covariance * DVector::from_column_slice(&v))[0];
                let prior_q = prior.quad_form(&v) + if jitter { MATERN_JITTER } else { 0.0 };
                post - prior_q
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One row per coefficient: `index,mean,marginal_sd`.
    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,mean,marginal_sd")?;
        for (i, (m, s)) in self.mean.iter().zip(self.marginal_sd()).enumerate() {
            writeln!(w, "{},{:.12e},{:.12e}", i + 1, m, s)?;
        }
        Ok(())
    }
}

pub fn posterior_mean_field(post: &GaussianPosterior) -> Result<Field> {
    match &post.basis {
        PosteriorBasis::Eigen(b) => {
            if b.len() != post.dim() {
                return Err(invalid("posterior dimension differs from its eigenbasis"));
            }
            Ok(Field::nodal(b.synthesize(post.mean.as_slice())))
        }
        PosteriorBasis::Nodal(mass) => {
            if mass.dim() != post.dim() {
                return Err(invalid("posterior dimension differs from its mesh"));
            }
            Ok(Field::nodal(post.mean.iter().cloned().collect()))
        }
        PosteriorBasis::Coefficients => Err(invalid("posterior has no basis to synthesize a field")),
    }
}

/// `count` draws `mean + F z`.
pub fn sample_posterior(post: &GaussianPosterior, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = post.dim();
    Ok((0..count)
        .map(|_| {
            let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            (&post.mean + &post.factor * z).iter().cloned().collect()
        })
        .collect())
}

/// Posterior mean and variance of `<f, psi>`.
pub fn functional_posterior(post: &GaussianPosterior, psi: &[f64]) -> Result<(f64, f64)> {
    let w = DVector::from_vec(post.functional_weights(psi)?);
    let mean = w.dot(&post.mean);
    let ftw = post.factor.tr_mul(&w);
    Ok((mean, ftw.norm_squared()))
}

#[derive(Debug, Clone, Copy)]
pub enum IntervalMode {
    Analytic,
    /// Radius from the absolute deviations of `draws` posterior samples.
    Empirical { draws: usize, seed: u64 },
}

/// Two-sided standard normal quantile `z_{1 - a/2}`.
pub fn normal_quantile(a: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - a / 2.0)
}

/// Interval centred at the posterior mean of `<f, psi>` with posterior mass `1 - a`.
pub fn credible_interval(post: &GaussianPosterior, psi: &[f64], a: f64, mode: IntervalMode) -> Result<(f64, f64)> {
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("level must lie in (0, 1), got {a}")));
    }
    let (mean, var) = functional_posterior(post, psi)?;
    let radius = match mode {
        IntervalMode::Analytic => normal_quantile(a) * var.sqrt(),
        IntervalMode::Empirical { draws, seed } => {
            if draws == 0 {
                return Err(invalid("empirical intervals need at least one draw"));
            }
            // <f, psi> - mean = (F^T w) . z, so one scalar per draw suffices.
            let w = DVector::from_vec(post.functional_weights(psi)?);
            let ftw = post.factor.tr_mul(&w);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut dev: Vec<f64> = (0..draws)
                .map(|_| ftw.iter().map(|c| { let z: f64 = StandardNormal.sample(&mut rng); c * z }).sum::<f64>().abs())
                .collect();
            dev.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let k = (((1.0 - a) * draws as f64).ceil() as usize).clamp(1, draws);
            dev[k - 1]
        }
    };
    Ok((mean - radius, mean + radius))
}
