//! Bayesian identification of the source term `f` in `div(c grad u) = f` on a
//! planar domain with homogeneous Dirichlet data, from noisy point values of
//! `u`.
//!
//! The pieces compose in the obvious order: [`mesh`] builds a P1 mesh,
//! [`fem`] assembles and solves the forward problem, [`spectral`] supplies
//! Laplacian eigenpairs for the series prior, [`priors`] builds Gaussian
//! priors, [`posterior`] does the conjugate update, [`synth`] generates data
//! and [`harness`] runs whole experiments.

pub mod error;
pub mod mesh;
pub mod sparse;
pub mod special;
pub mod fem;
pub mod spectral;
pub mod priors;
pub mod posterior;
pub mod synth;
pub mod harness;

mod delaunay;

pub use error::{Error, Result};
pub use fem::{BasisKind, Field, ForwardMatrix, ForwardSolver};
pub use mesh::{Ellipse, Mesh, Point};
pub use posterior::{conjugate_update, GaussianPosterior};
pub use priors::PriorCovariance;
pub use spectral::EigenBasis;
