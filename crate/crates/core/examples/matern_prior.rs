//! Matérn kernel values, a Matérn covariance on mesh nodes, and prior draws.

use srcid::mesh::mesh_with_node_count;
use srcid::priors::{matern_covariance_matrix, matern_kernel, sample_prior};
use srcid::Ellipse;

fn main() -> srcid::Result<()> {
    for alpha in [0.5, 1.5, 2.5, 10.0] {
        let row: Vec<String> =
            [0.0, 0.05, 0.1, 0.2, 0.5].iter().map(|&r| format!("{:.5}", matern_kernel(r, alpha, 0.1).unwrap())).collect();
        println!("alpha={alpha:>4}: k(r) at r=0,0.05,0.1,0.2,0.5 -> {}", row.join(" "));
    }

    let mesh = mesh_with_node_count(Ellipse::standard(), 300)?;
    let prior = matern_covariance_matrix(mesh.nodes(), 10.0, 0.1)?;
    println!("{} x {} covariance, trace {:.3}", prior.dim(), prior.dim(), prior.trace());
    let draws = sample_prior(&prior, 3, 7)?;
    for (i, d) in draws.iter().enumerate() {
        let rms = (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt();
        println!("draw {i}: rms {rms:.3}");
    }
    Ok(())
}
