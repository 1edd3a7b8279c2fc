//! Dirichlet Laplacian eigenpairs below a cutoff, with their checks, and the
//! asymptotic variance of a functional from c-weighted eigenpairs.

use srcid::fem::assemble_stiffness;
use srcid::mesh::mesh_with_node_count;
use srcid::spectral::{asymptotic_variance, laplacian_eigenpairs, weighted_eigenpairs_below};
use srcid::synth::default_diffusivity;
use srcid::Ellipse;

fn main() -> srcid::Result<()> {
    let mesh = mesh_with_node_count(Ellipse::standard(), 4500)?;
    let basis = laplacian_eigenpairs(&mesh, 500.0)?;
    println!("{} eigenvalues below 500", basis.len());
    for (j, l) in basis.values().iter().enumerate().filter(|(j, _)| j % 12 == 0 || *j + 1 == basis.len()) {
        println!("  lambda_{:<3} = {l:.4}", j + 1);
    }
    let k = assemble_stiffness(&mesh, |_| 1.0)?;
    println!("orthonormality defect {:.2e}", basis.orthonormality_defect());
    println!("max relative residual {:.2e}", basis.max_residual(&k, mesh.boundary_mask()));

    // Weyl: N(lambda) ~ |O| lambda / (4 pi).
    println!("Weyl estimate {:.1}", mesh.area() * 500.0 / (4.0 * std::f64::consts::PI));

    let weighted = weighted_eigenpairs_below(&mesh, default_diffusivity, 2000.0)?;
    let av = asymptotic_variance(basis.function(1), &weighted)?;
    println!(
        "|div(c grad phi_2)|^2 = {:.3} from {} terms (last-decile share {:.2e})",
        av.value, av.terms, av.tail_fraction
    );
    Ok(())
}
