//! Solves div(c grad u) = f on the standard domain and builds a small
//! forward matrix from a few hat-function sources.

use srcid::fem::{hat_functions_on, ForwardSolver};
use srcid::mesh::mesh_with_node_count;
use srcid::synth::{default_diffusivity, TruthVariant};
use srcid::Ellipse;

fn main() -> srcid::Result<()> {
    let mesh = mesh_with_node_count(Ellipse::standard(), 4500)?;
    let solver = ForwardSolver::new(&mesh, default_diffusivity)?;

    let f = TruthVariant::ThreeSources.field(&mesh);
    let u = solver.solve(&f)?;
    let (lo, hi) = u.coeffs.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("u ranges over [{lo:.6}, {hi:.6}]");
    println!("relative residual {:.2e}", solver.relative_residual(&f.coeffs, &u.coeffs));

    // Forward matrix of 20 coarse hat functions observed at 5 points.
    let coarse = mesh_with_node_count(Ellipse::standard(), 20)?;
    let hats = hat_functions_on(&coarse, &mesh);
    let points = [[0.0, 0.0], [0.5, 0.1], [-0.5, 0.0], [0.0, 0.5], [0.3, -0.3]];
    let g = solver.forward_matrix(&mesh, &hats, &points)?;
    println!("G is {} x {}", g.rows(), g.cols());
    println!("first row: {:.3e}", g.matrix().view((0, 0), (1, 6)));
    Ok(())
}
