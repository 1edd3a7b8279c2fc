mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_and_stiffness_identities(e in ellipse(), c0 in 0.1f64..5.0, c1 in 0.0f64..5.0) {
        fem_identities(e, c0, c1)?;
    }

    #[test]
    fn eigenfunctions_are_orthonormal(e in ellipse()) {
        eigen_orthonormality(e)?;
    }

    #[test]
    fn posterior_shrinks_prior(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..8, sigma in 0.01f64..2.0) {
        loewner_shrinkage(seed, rows, cols, sigma)?;
    }

    #[test]
    fn seeded_generation_is_deterministic(seed in any::<u64>(), total in 10usize..500, n1 in 1usize..500, n2 in 1usize..500) {
        determinism(seed, total, n1, n2)?;
    }

    #[test]
    fn rice_ignores_shifts(y in proptest::collection::vec(-10.0f64..10.0, 2..200), c in -1e3f64..1e3) {
        rice_translation(y, c)?;
    }

    #[test]
    fn l2_error_is_a_metric(seed in any::<u64>()) {
        triangle_inequality(seed)?;
    }

    #[test]
    fn matern_decreases_with_distance(alpha in 0.3f64..12.0, ell in 0.05f64..2.0) {
        matern_monotone(alpha, ell)?;
    }
}
