//! Synthetic observations, nested subsamples and the difference-based noise
//! estimate.

use srcid::mesh::mesh_with_node_count;
use srcid::synth::{
    default_diffusivity, generate_observations, nearest_neighbor_order, rice_sigma_hat, subsample_indices,
    TruthVariant,
};
use srcid::Ellipse;

fn main() -> srcid::Result<()> {
    let mesh = mesh_with_node_count(Ellipse::standard(), 4500)?;
    let truth = TruthVariant::ThreeSources.field(&mesh);
    println!("f0(0,0) = {:.6} (three sources), {:.6} (printed)", TruthVariant::ThreeSources.eval([0.0, 0.0]), TruthVariant::Printed.eval([0.0, 0.0]));

    let sigma = 0.0005;
    let obs = generate_observations(&mesh, default_diffusivity, &truth, sigma, 0)?;
    for n in [250, 1000, 4500] {
        let sub = obs.select(&subsample_indices(mesh.node_count(), n, 0)?);
        let storage = rice_sigma_hat(&sub.values)?;
        let order = nearest_neighbor_order(&sub.points);
        let nn: Vec<f64> = order.iter().map(|&i| sub.values[i]).collect();
        println!("n={n:>4}: sigma_hat {storage:.5} (storage order), {:.5} (nearest-neighbour path)", rice_sigma_hat(&nn)?);
    }

    let mut out = Vec::new();
    obs.select(&[0, 1, 2]).write_csv(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
