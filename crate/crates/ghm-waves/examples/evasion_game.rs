//! Pursuit-evasion against two coverage schedules on the annulus: a
//! programmed global wave (which an unbounded-speed evader dodges forever)
//! and blanket coverage (immediate capture).

use ghm_waves::engine::{run, SnapshotPolicy};
use ghm_waves::evasion::{EvasionInstance, Outcome};
use ghm_waves::geometry::{annulus_frame, build_domain};
use ghm_waves::topology::{homology_basis, CohomClass};
use ghm_waves::waves::realize_class;
use ghm_waves::Network;

fn main() {
    let domain = build_domain(&annulus_frame(22.0, 2.0)).unwrap();
    let positions = domain.sample_points(760, 12);
    let net = Network::build(&positions, 1.5, 1.5);
    let basis = homology_basis(&net).unwrap();

    let wave = realize_class(&net, &domain, &basis, &CohomClass { coeffs: vec![1] }).unwrap();
    let trace = run(&net, &wave, 260, None, SnapshotPolicy::Full);
    let inst = EvasionInstance::from_trace(&domain, &net, &trace, 0.75, 40).unwrap();
    let verdict = inst.decide();
    match &verdict.outcome {
        Outcome::SurvivesForever { first, second } => {
            let w = verdict.witness.as_ref().unwrap();
            println!(
                "global wave: evader survives (schedule recurs at ticks {first} and {second});"
            );
            println!(
                "  witness path: {} steps, starts in cell {:?} at ({:.2}, {:.2})",
                w.len(),
                w[0].cell,
                w[0].position[0],
                w[0].position[1]
            );
        }
        other => println!("global wave: unexpected outcome {other:?}"),
    }

    // Blanket coverage: everyone stays awake from the entry tick on.
    let everyone: Vec<usize> = (0..net.node_count()).collect();
    let schedule = vec![everyone; 50];
    let inst = EvasionInstance::new(&domain, &net, schedule, 0.75, 10).unwrap();
    match inst.decide().outcome {
        Outcome::CapturedByTick(t) => println!("blanket coverage: captured by tick {t}"),
        other => println!("blanket coverage: unexpected outcome {other:?}"),
    }

    // The same instances decided on the 1-d skeleton complex agree.
    let inst = EvasionInstance::from_trace(&domain, &net, &trace, 0.75, 40).unwrap();
    println!("1-d skeleton verdict on the wave: {:?}", inst.decide_1d().outcome);
}
