//! Builds the standard elliptical mesh, checks it, and refines it once.

use srcid::mesh::{build_mesh_in, mesh_with_node_count};
use srcid::Ellipse;

fn main() -> srcid::Result<()> {
    let domain = Ellipse::standard();
    println!("domain: a={} b={} theta={:.4}, area {:.6}", domain.a, domain.b, domain.theta, domain.area());

    let mesh = mesh_with_node_count(domain, 4500)?;
    mesh.check_invariants()?;
    println!(
        "{} nodes ({} interior), {} triangles, h_max {:.4}, area {:.6}",
        mesh.node_count(),
        mesh.interior_nodes().len(),
        mesh.element_count(),
        mesh.max_edge_length(),
        mesh.area()
    );

    let coarse = build_mesh_in(domain, 0.1)?;
    let fine = coarse.refine();
    println!("h=0.1: {} nodes, refined: {} nodes", coarse.node_count(), fine.node_count());

    let p = [0.3, -0.2];
    let loc = mesh.locate(p).expect("inside");
    println!("({}, {}) lies in triangle {} with barycentrics {:?}", p[0], p[1], loc.element, loc.bary);
    Ok(())
}
