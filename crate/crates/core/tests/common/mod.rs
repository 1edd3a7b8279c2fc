//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srcid::fem::{assemble_mass, assemble_stiffness};
use srcid::mesh::build_mesh_in;
use srcid::posterior::ConjugateSolver;
use srcid::priors::{diagonal_prior, matern_kernel};
use srcid::spectral::laplacian_eigenpairs;
use srcid::synth::{add_noise, l2_error, rice_sigma_hat, subsample_indices};
use srcid::{Ellipse, Field, ForwardMatrix, Mesh};

pub type Check = std::result::Result<(), TestCaseError>;

pub fn ellipse() -> impl Strategy<Value = Ellipse> {
    (0.6f64..1.4, 0.4f64..1.0, 0.0f64..3.1).prop_map(|(a, b, t)| Ellipse::new(a, b, t).unwrap())
}

fn mesh(e: Ellipse, h: f64) -> std::result::Result<Mesh, TestCaseError> {
    build_mesh_in(e, h).map_err(|err| TestCaseError::fail(err.to_string()))
}

/// 1^T M 1 is the polygon area and K 1 = 0 for any positive c.
pub fn fem_identities(e: Ellipse, c0: f64, c1: f64) -> Check {
    let m = mesh(e, 0.12)?;
    let ones = vec![1.0; m.node_count()];
    let mass = assemble_mass(&m);
    prop_assert!((mass.quad_form(&ones) - m.area()).abs() <= 1e-12 * m.area());
    let k = assemble_stiffness(&m, |p| c0 + c1 * p[0] * p[0]).unwrap();
    let k1 = k.mul_vec(&ones);
    let scale = (0..m.node_count()).map(|i| k.get(i, i)).fold(0.0, f64::max);
    prop_assert!(k1.iter().all(|v| v.abs() <= 1e-11 * scale));
    prop_assert!(k.asymmetry() <= 1e-14 * scale);
    prop_assert!(mass.asymmetry() == 0.0);
    Ok(())
}

/// Computed eigenfunctions are M-orthonormal with ascending eigenvalues.
pub fn eigen_orthonormality(e: Ellipse) -> Check {
    let m = mesh(e, 0.15)?;
    let basis = laplacian_eigenpairs(&m, 150.0).map_err(|err| TestCaseError::fail(err.to_string()))?;
    prop_assert!(!basis.is_empty());
    prop_assert!(basis.orthonormality_defect() < 1e-8);
    prop_assert!(basis.values().windows(2).all(|w| w[0] <= w[1]));
    Ok(())
}

/// The posterior covariance never exceeds the prior covariance.
pub fn loewner_shrinkage(seed: u64, rows: usize, cols: usize, sigma: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(rows, cols, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
    let var: Vec<f64> = (0..cols).map(|j| 1.0 / (1.0 + j as f64)).collect();
    let prior = diagonal_prior(var).unwrap();
    let conj = ConjugateSolver::new(&ForwardMatrix(g), sigma, &prior).unwrap();
    let post = conj.posterior(&vec![0.0; rows]).unwrap();
    prop_assert!(post.shrinkage_excess(&prior, 50, seed) <= 1e-12);
    let diff = prior.to_dense() - conj.covariance();
    let min_eig = diff.symmetric_eigenvalues().min();
    prop_assert!(min_eig >= -1e-12, "smallest eigenvalue of prior - posterior: {min_eig}");
    Ok(())
}

/// Same seed, same data; smaller subsamples are subsets of larger ones.
pub fn determinism(seed: u64, total: usize, n1: usize, n2: usize) -> Check {
    let (lo, hi) = (n1.min(n2).min(total), n1.max(n2).min(total));
    let a = subsample_indices(total, hi, seed).unwrap();
    prop_assert_eq!(&a, &subsample_indices(total, hi, seed).unwrap());
    let b = subsample_indices(total, lo, seed).unwrap();
    prop_assert!(b.iter().all(|i| a.binary_search(i).is_ok()));
    let clean = vec![0.5; 64];
    let y1 = add_noise(&clean, 0.1, &mut ChaCha8Rng::seed_from_u64(seed));
    let y2 = add_noise(&clean, 0.1, &mut ChaCha8Rng::seed_from_u64(seed));
    prop_assert_eq!(y1, y2);
    Ok(())
}

/// Adding a constant to every observation leaves the Rice estimate unchanged.
pub fn rice_translation(y: Vec<f64>, shift: f64) -> Check {
    let a = rice_sigma_hat(&y).unwrap();
    let shifted: Vec<f64> = y.iter().map(|v| v + shift).collect();
    let b = rice_sigma_hat(&shifted).unwrap();
    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a), "{a} vs {b}");
    Ok(())
}

/// The L2 error is a metric on nodal fields.
pub fn triangle_inequality(seed: u64) -> Check {
    let m = mesh(Ellipse::standard(), 0.2)?;
    let mass = assemble_mass(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; m.node_count()];
    let mut field = || Field::nodal(add_noise(&zero, 1.0, &mut rng));
    let (f, g, h) = (field(), field(), field());
    let d = |a: &Field, b: &Field| l2_error(a, b, &mass).unwrap();
    prop_assert!(d(&f, &h) <= d(&f, &g) + d(&g, &h) + 1e-12);
    prop_assert!((d(&f, &g) - d(&g, &f)).abs() <= 1e-14);
    prop_assert!(d(&f, &f) == 0.0);
    Ok(())
}

/// Matérn correlations start at 1 and decrease with distance.
pub fn matern_monotone(alpha: f64, ell: f64) -> Check {
    prop_assert!((matern_kernel(0.0, alpha, ell).unwrap() - 1.0).abs() < 1e-12);
    let mut prev = 1.0 + 1e-12;
    for k in 1..60 {
        let v = matern_kernel(0.05 * k as f64 * ell, alpha, ell).unwrap();
        prop_assert!(v > 0.0 || v == 0.0 && prev < 1e-200);
        prop_assert!(v <= prev, "k({}) = {v} > {prev}", 0.05 * k as f64 * ell);
        prev = v;
    }
    Ok(())
}

fn s<T: std::fmt::Debug>(r: std::result::Result<(), proptest::test_runner::TestError<T>>) -> std::result::Result<(), String> {
    r.map_err(|e| format!("{e:?}"))
}

/// Runs every property above; returns the names of the failing ones.
pub fn run_all(cases: u32) -> Vec<(String, String)> {
    let mut failures = Vec::new();
    let mut record = |name: &str, r: std::result::Result<(), String>| {
        if let Err(e) = r {
            failures.push((name.to_string(), e));
        }
    };
    let runner = || TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });

    record("fem identities", s(runner().run(&(ellipse(), 0.1f64..5.0, 0.0f64..5.0), |(e, a, b)| fem_identities(e, a, b))));
    record("eigen orthonormality", s(runner().run(&ellipse(), eigen_orthonormality)));
    record(
        "Loewner shrinkage",
        s(runner().run(&(any::<u64>(), 1usize..12, 1usize..8, 0.01f64..2.0), |(a, b, c, d)| loewner_shrinkage(a, b, c, d))),
    );
    record(
        "determinism",
        s(runner().run(&(any::<u64>(), 10usize..500, 1usize..500, 1usize..500), |(a, b, c, d)| determinism(a, b, c, d))),
    );
    record(
        "Rice translation",
        s(runner().run(&(proptest::collection::vec(-10.0f64..10.0, 2..200), -1e3f64..1e3), |(y, c)| rice_translation(y, c))),
    );
    record("L2 triangle inequality", s(runner().run(&any::<u64>(), triangle_inequality)));
    record("Matérn monotonicity", s(runner().run(&(0.3f64..12.0, 0.05f64..2.0), |(a, l)| matern_monotone(a, l))));
    failures
}
