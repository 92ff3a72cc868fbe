//! Sample a sensor network over an annulus-shaped hallway and print what the
//! geometry layer sees: rectangle decomposition, skeleton, loops, and the
//! communication graph built on top.

use ghm_waves::geometry::{annulus_frame, build_domain};
use ghm_waves::topology::homology_basis;
use ghm_waves::Network;

fn main() {
    let rects = annulus_frame(22.0, 2.0);
    let domain = build_domain(&rects).expect("annulus frame is a valid hallway");

    println!("domain: {} input rects, area {:.1}", rects.len(), domain.area());
    println!(
        "decomposition: {} cells, skeleton {} vertices / {} edges, {} independent loops",
        domain.decomposition().len(),
        domain.skeleton.vertices.len(),
        domain.skeleton.edges.len(),
        domain.loop_count(),
    );

    let positions = domain.sample_points(760, 12);
    let net = Network::build(&positions, 1.5, 1.5);
    println!(
        "network: {} nodes, {} edges, mean degree {:.1}",
        net.node_count(),
        net.edges.len(),
        2.0 * net.edges.len() as f64 / net.node_count() as f64
    );
    println!("connected: {}", net.is_connected());

    let basis = homology_basis(&net).expect("free H1 on a planar sample");
    println!("graph genus (independent cycles mod boundaries): {}", basis.g);
    for (k, cycle) in basis.basis_cycles.iter().enumerate() {
        println!("  basis cycle {k}: {} edges", cycle.terms.len());
    }

    for cut in domain.loop_cuts() {
        println!(
            "cut for skeleton edge {}: ({:.1}, {:.1}) -- ({:.1}, {:.1})",
            cut.skeleton_edge, cut.a[0], cut.a[1], cut.b[0], cut.b[1]
        );
    }
}
