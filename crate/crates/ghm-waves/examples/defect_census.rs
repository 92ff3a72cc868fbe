//! Classify the defect content of states on an annulus network: a random
//! state, a programmed global wave, and the dead state, reporting seeds,
//! winding degrees on the homology basis, and the defect kind.

use ghm_waves::geometry::{annulus_frame, build_domain};
use ghm_waves::topology::{cohomology_class, find_defect, homology_basis, CohomClass};
use ghm_waves::waves::realize_class;
use ghm_waves::{Network, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let domain = build_domain(&annulus_frame(22.0, 2.0)).unwrap();
    let positions = domain.sample_points(760, 12);
    let net = Network::build(&positions, 1.5, 1.5);
    let basis = homology_basis(&net).unwrap();
    let n = 5u8;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random = State::new(
        (0..net.node_count()).map(|_| rng.gen_range(0..n)).collect(),
        n,
    );
    let wave = realize_class(&net, &domain, &basis, &CohomClass { coeffs: vec![1] })
        .expect("annulus admits a degree-1 wave");
    let dead = State::zero(net.node_count(), n);

    for (label, state) in [("random", &random), ("global wave", &wave), ("dead", &dead)] {
        let report = find_defect(state, &net, &basis);
        println!("--- {label} ---");
        println!("  seed present: {}", report.seed.is_some());
        for (k, d) in report.basis_degrees.iter().enumerate() {
            match d {
                Ok(deg) => println!("  degree on basis cycle {k}: {deg}"),
                Err((i, j)) => println!("  basis cycle {k}: discontinuous at edge ({i}, {j})"),
            }
        }
        println!("  verdict: {:?} (defect = {})", report.kind, report.has_defect);
        if let Ok(class) = cohomology_class(state, &net, &basis) {
            println!("  cohomology class: {:?}", class.coeffs);
        }
    }
}
