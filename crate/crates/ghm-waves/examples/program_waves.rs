//! Wave programming on the figure eight: prescribe a cohomology class,
//! synthesize an initial state realizing it, and confirm the class is a
//! conserved quantity of the dynamics.

use ghm_waves::engine::{run, SnapshotPolicy};
use ghm_waves::geometry::{build_domain, figure_eight};
use ghm_waves::topology::{cohomology_class, homology_basis, CohomClass};
use ghm_waves::waves::realize_class;
use ghm_waves::Network;

fn main() {
    let domain = build_domain(&figure_eight(24.0, 2.0)).unwrap();
    let positions = domain.sample_points(2100, 25);
    let net = Network::build(&positions, 1.5, 1.5);
    let basis = homology_basis(&net).unwrap();
    println!("figure eight: genus {}", basis.g);

    for target in [vec![1, 0], vec![0, -1], vec![2, 1], vec![-1, 2]] {
        let goal = CohomClass { coeffs: target.clone() };
        let state = match realize_class(&net, &domain, &basis, &goal) {
            Ok(s) => s,
            Err(e) => {
                println!("target {target:?}: not realizable here ({e})");
                continue;
            }
        };
        let n = state.n;
        let got = cohomology_class(&state, &net, &basis).unwrap();
        let trace = run(&net, &state, 5 * u64::from(n), None, SnapshotPolicy::Last(1));
        let after = cohomology_class(&trace.final_state, &net, &basis).unwrap();
        println!(
            "target {target:?}: alphabet n = {n}, realized {:?}, after {} ticks {:?}",
            got.coeffs,
            5 * u64::from(n),
            after.coeffs
        );
        assert_eq!(got.coeffs, target);
        assert_eq!(after.coeffs, target);
    }
}
