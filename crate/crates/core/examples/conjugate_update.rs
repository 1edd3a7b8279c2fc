//! Series-prior posterior from noisy observations, with credible intervals
//! for a few coefficient functionals.

use srcid::fem::ForwardSolver;
use srcid::mesh::mesh_with_node_count;
use srcid::posterior::{credible_interval, posterior_mean_field, IntervalMode};
use srcid::priors::series_prior_covariance;
use srcid::spectral::laplacian_eigenpairs;
use srcid::synth::{default_diffusivity, generate_observations, l2_error, l2_norm, subsample_indices, TruthVariant};
use srcid::{conjugate_update, Ellipse};
use std::sync::Arc;

fn main() -> srcid::Result<()> {
    let mesh = mesh_with_node_count(Ellipse::standard(), 4500)?;
    let truth = TruthVariant::ThreeSources.field(&mesh);
    let sigma = 0.0005;
    let obs = generate_observations(&mesh, default_diffusivity, &truth, sigma, 1)?;
    let idx = subsample_indices(mesh.node_count(), 1000, 1)?;
    let obs = obs.select(&idx);

    let basis = Arc::new(laplacian_eigenpairs(&mesh, 500.0)?);
    let prior = series_prior_covariance(Arc::clone(&basis), 0.75)?;
    let solver = ForwardSolver::new(&mesh, default_diffusivity)?;
    let g = solver.forward_matrix_at_nodes(basis.functions(), &idx);
    let post = conjugate_update(&g, &obs.values, sigma, &prior)?;

    let mean = basis.to_nodal(&posterior_mean_field(&post)?)?;
    let mass = solver.mass();
    println!("n = {}, relative L2 error {:.4}", obs.len(), l2_error(&mean, &truth, mass)? / l2_norm(&truth, mass)?);

    let true_coeffs = basis.project(&truth.coeffs);
    for j in [1usize, 2, 4, 8] {
        let mut psi = vec![0.0; basis.len()];
        psi[j - 1] = 1.0;
        let (lo, hi) = credible_interval(&post, &psi, 0.05, IntervalMode::Analytic)?;
        let (elo, ehi) = credible_interval(&post, &psi, 0.05, IntervalMode::Empirical { draws: 4000, seed: 3 })?;
        println!(
            "<f, phi_{j}> = {:+.5}: 95% [{lo:+.5}, {hi:+.5}], sampled [{elo:+.5}, {ehi:+.5}]",
            true_coeffs[j - 1]
        );
    }
    Ok(())
}
