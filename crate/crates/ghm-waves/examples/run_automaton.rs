//! Run the cyclic automaton from a random initial state and watch activity
//! decay (or persist) over time, dumping the standard CSV/JSONL artifacts to
//! stdout-adjacent files in a temp directory.

use ghm_waves::engine::{
    detect_periodicity, run, wavefront, write_events_jsonl, write_snapshots_csv, SnapshotPolicy,
};
use ghm_waves::geometry::{build_domain, Rect};
use ghm_waves::{Network, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let domain = build_domain(&[Rect::new(0.0, 0.0, 30.0, 2.0)]).unwrap();
    let positions = domain.sample_points(360, 3);
    let net = Network::build(&positions, 1.2, 1.2);

    let n = 5u8;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let values: Vec<u8> = (0..net.node_count()).map(|_| rng.gen_range(0..n)).collect();
    let initial = State::new(values, n);

    let ticks = 60;
    let trace = run(&net, &initial, ticks, None, SnapshotPolicy::Full);

    for t in (0..=ticks).step_by(10) {
        let s = trace.snapshot_at(t).unwrap();
        println!(
            "tick {t:3}: awake fraction {:.3}, seedless = {}",
            wavefront(s).len() as f64 / s.values.len() as f64,
            ghm_waves::topology::find_seed(s, &net).is_none(),
        );
    }

    match detect_periodicity(&trace, u64::from(n)) {
        Ok(reports) => {
            let periodic = reports.iter().filter(|r| r.eventually_periodic).count();
            println!("{periodic}/{} nodes eventually periodic", reports.len());
        }
        Err(e) => println!("periodicity check skipped: {e}"),
    }

    let dir = std::env::temp_dir().join("ghm-run-automaton");
    std::fs::create_dir_all(&dir).unwrap();
    let mut snaps = std::fs::File::create(dir.join("snapshots.csv")).unwrap();
    write_snapshots_csv(&trace, &mut snaps).unwrap();
    let mut events = std::fs::File::create(dir.join("events.jsonl")).unwrap();
    write_events_jsonl(&trace, &mut events).unwrap();
    println!("wrote snapshots.csv and events.jsonl under {}", dir.display());
}
