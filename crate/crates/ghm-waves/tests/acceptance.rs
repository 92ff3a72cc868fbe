//! End-to-end acceptance checks, one test per criterion.  Each prints a
//! single `PASS`/`FAIL` line (visible under `--nocapture`); the FAIL line is
//! emitted from a drop guard so it also appears when an assertion unwinds.


use ghm_waves::engine::{
    cycle_network, is_continuous, run, subordination_forest,
    SnapshotPolicy,
};
use ghm_waves::evasion::{CellComplex, EvasionInstance, Outcome};
use ghm_waves::geometry::{annulus_frame, build_domain, figure_eight, HallwayDomain, Rect};
use ghm_waves::scenario::{pin_seed, replicate_paper_scenario, run_experiment, Overrides};
use ghm_waves::stochastic::{
    defect_survival_curve, estimate_seed_probability, LinkModel, MonteCarloConfig,
};
use ghm_waves::topology::{
    cohomology_class, degree, find_defect, homology_basis, seed_nodes_all, CohomClass, H1Basis,
};
use ghm_waves::waves::realize_class;
use ghm_waves::{Network, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Criterion {
    line: String,
    passed: bool,
}

impl Criterion {
    fn new(index: u32, name: &str) -> Criterion {
        Criterion { line: format!("criterion {index} ({name})"), passed: false }
    }
    fn pass(mut self) {
        self.passed = true;
        println!("{}: PASS", self.line);
    }
}

impl Drop for Criterion {
    fn drop(&mut self) {
        if !self.passed {
            println!("{}: FAIL", self.line);
        }
    }
}

// --- shared corpus for criteria 1 and 2 -----------------------------------

/// Continuous state from a slowly varying linear field: per-edge change of
/// the field is at most 1, so floors differ by at most 1.
fn linear_field_state(net: &Network, n: u8, rng: &mut ChaCha8Rng) -> State {
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mag: f64 = rng.gen_range(0.0..1.0) / net.comm_radius;
    let (a, b) = (mag * angle.cos(), mag * angle.sin());
    let c: f64 = rng.gen_range(0.0..f64::from(n));
    let values = net
        .positions
        .iter()
        .map(|p| ((a * p[0] + b * p[1] + c).floor() as i64).rem_euclid(i64::from(n)) as u8)
        .collect();
    State::new(values, n)
}

/// Continuous state winding k times around the annulus center.
fn angular_field_state(net: &Network, center: [f64; 2], n: u8, k: i64) -> State {
    let kn = k * i64::from(n);
    let values = net
        .positions
        .iter()
        .map(|p| {
            let theta = (p[1] - center[1]).atan2(p[0] - center[0]) + std::f64::consts::PI;
            let f = kn as f64 * theta / std::f64::consts::TAU;
            (f.floor() as i64).rem_euclid(i64::from(n)) as u8
        })
        .collect();
    State::new(values, n)
}

fn corpus() -> Vec<(Network, H1Basis, Vec<State>)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let square = build_domain(&[Rect::new(0.0, 0.0, 12.0, 12.0)]).unwrap();
    let mut sample_seed = 100u64;
    for _ in 0..25u64 {
        let net = loop {
            sample_seed += 1;
            let pts = square.sample_points(290, sample_seed);
            let net = Network::build(&pts, 1.5, 1.5);
            if net.is_connected() {
                break net;
            }
        };
        let basis = homology_basis(&net).unwrap();
        let states: Vec<State> = (0..20)
            .map(|_| {
                let n = rng.gen_range(4..=20);
                linear_field_state(&net, n, &mut rng)
            })
            .collect();
        out.push((net, basis, states));
    }

    let annulus = build_domain(&annulus_frame(22.0, 2.0)).unwrap();
    let mut sample_seed = 200u64;
    for _ in 0..25u64 {
        let net = loop {
            sample_seed += 1;
            let pts = annulus.sample_points(760, sample_seed);
            let net = Network::build(&pts, 1.5, 1.5);
            if net.is_connected() {
                break net;
            }
        };
        let basis = homology_basis(&net).unwrap();
        let states: Vec<State> = (0..20)
            .map(|_| {
                let n = rng.gen_range(4..=20);
                if rng.gen_bool(0.5) {
                    let k = if rng.gen_bool(0.5) { 1 } else { -1 };
                    angular_field_state(&net, [11.0, 11.0], n, k)
                } else {
                    linear_field_state(&net, n, &mut rng)
                }
            })
            .collect();
        out.push((net, basis, states));
    }
    out
}

#[test]
fn criterion_1_degree_invariance() {
    let c = Criterion::new(1, "degree invariance");
    let mut states_seen = 0usize;
    for (net, basis, states) in corpus() {
        for s0 in states {
            states_seen += 1;
            let rep = is_continuous(&net, &s0, None);
            assert!(rep.continuous, "corpus state must be continuous");
            let d0: Vec<i64> = basis
                .basis_cycles
                .iter()
                .map(|cy| degree(&net, &s0, cy).unwrap())
                .collect();
            let ticks = 3 * u64::from(s0.n);
            let trace = run(&net, &s0, ticks, None, SnapshotPolicy::Full);
            for t in 1..=ticks {
                let s = trace.snapshot_at(t).unwrap();
                for (cy, &want) in basis.basis_cycles.iter().zip(&d0) {
                    assert_eq!(degree(&net, s, cy).unwrap(), want, "degree drifted at tick {t}");
                }
            }
        }
    }
    assert_eq!(states_seen, 1000);
    c.pass();
}

#[test]
fn criterion_2_continuity_forward_invariance() {
    let c = Criterion::new(2, "continuity forward-invariance");
    for (net, _, states) in corpus() {
        for s0 in states {
            let ticks = 3 * u64::from(s0.n);
            let trace = run(&net, &s0, ticks, None, SnapshotPolicy::Full);
            for t in 0..=ticks {
                let rep = is_continuous(&net, trace.snapshot_at(t).unwrap(), None);
                assert!(rep.continuous, "discontinuity appeared at tick {t}");
            }
        }
    }
    c.pass();
}

// --- criterion 3 -----------------------------------------------------------

fn dies_out(net: &Network, s0: &State) -> bool {
    let ticks = (net.node_count() as u64) * u64::from(s0.n);
    let trace = run(net, s0, ticks, None, SnapshotPolicy::None);
    trace.final_state.is_zero()
}

fn check_die_iff_no_defect(net: &Network, basis: &H1Basis, s0: &State) {
    let report = find_defect(s0, net, basis);
    let died = dies_out(net, s0);
    assert_eq!(
        died, !report.has_defect,
        "died={died} but defect report says {:?} for {:?}",
        report.kind, s0.values
    );
}

/// Every continuous state on the cycle C_m with alphabet n, generated by
/// walking cyclic differences in {-1, 0, +1}.
fn enumerate_cycle_states(m: usize, n: u8) -> Vec<State> {
    let mut out = Vec::new();
    let mut diffs = vec![0i8; m - 1];
    loop {
        for v0 in 0..n {
            let mut values = vec![v0];
            for &d in &diffs {
                let prev = i16::from(*values.last().unwrap());
                values.push((prev + i16::from(d)).rem_euclid(i16::from(n)) as u8);
            }
            // The wrap-around edge must be continuous as well.
            let wrap: i8 = diffs.iter().sum::<i8>();
            if wrap.rem_euclid(n as i8) <= 1 || wrap.rem_euclid(n as i8) == n as i8 - 1 {
                out.push(State::new(values, n));
            }
        }
        // Odometer over {-1, 0, 1}^(m-1).
        let mut i = 0;
        loop {
            if i == diffs.len() {
                return out;
            }
            if diffs[i] < 1 {
                diffs[i] += 1;
                break;
            }
            diffs[i] = -1;
            i += 1;
        }
    }
}

/// Random continuous state by greedy BFS assignment; retries until every
/// node gets a value compatible with all already-assigned neighbors.
fn random_continuous_state(net: &Network, n: u8, rng: &mut ChaCha8Rng) -> State {
    'retry: loop {
        let nodes = net.node_count();
        let mut values: Vec<Option<u8>> = vec![None; nodes];
        let mut order: Vec<usize> = (0..nodes).collect();
        for i in (1..nodes).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for &x in &order {
            let mut allowed: Vec<u8> = (0..n).collect();
            for &(y, _) in &net.adjacency[x] {
                if let Some(v) = values[y] {
                    allowed.retain(|&u| {
                        let d = (i16::from(u) - i16::from(v)).rem_euclid(i16::from(n));
                        d == 0 || d == 1 || d == i16::from(n) - 1
                    });
                }
            }
            if allowed.is_empty() {
                continue 'retry;
            }
            values[x] = Some(allowed[rng.gen_range(0..allowed.len())]);
        }
        return State::new(values.into_iter().map(Option::unwrap).collect(), n);
    }
}

#[test]
fn criterion_3_die_iff_no_defect() {
    let c = Criterion::new(3, "die iff no defect");
    for m in 3..=8 {
        let net = cycle_network(m);
        let basis = homology_basis(&net).unwrap();
        for n in 3..=5u8 {
            for s0 in enumerate_cycle_states(m, n) {
                check_die_iff_no_defect(&net, &basis, &s0);
            }
        }
    }

    let square = build_domain(&[Rect::new(0.0, 0.0, 5.0, 5.0)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut done = 0;
    let mut sample_seed = 0u64;
    while done < 500 {
        sample_seed += 1;
        let count = rng.gen_range(4..=12);
        let pts = square.sample_points(count, sample_seed);
        let net = Network::build(&pts, 2.6, 2.6);
        if !net.is_connected() {
            continue;
        }
        let basis = match homology_basis(&net) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let n = rng.gen_range(3..=5);
        let s0 = random_continuous_state(&net, n, &mut rng);
        assert!(is_continuous(&net, &s0, None).continuous);
        check_die_iff_no_defect(&net, &basis, &s0);
        done += 1;
    }
    c.pass();
}

// --- criterion 4 -----------------------------------------------------------

#[test]
fn criterion_4_realization() {
    let c = Criterion::new(4, "class realization");
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    let mut fixtures: Vec<(HallwayDomain, usize, usize, u64)> = Vec::new();
    // (domain, genus, node count, sample seed)
    fixtures.push((build_domain(&annulus_frame(30.0, 2.0)).unwrap(), 1, 1400, 12));
    fixtures.push((build_domain(&figure_eight(40.0, 2.0)).unwrap(), 2, 3600, 25));

    let mut targets_done = 0;
    for (domain, genus, count, seed) in &fixtures {
        let pts = domain.sample_points(*count, *seed);
        let net = Network::build(&pts, 1.5, 1.5);
        let basis = homology_basis(&net).unwrap();
        assert_eq!(basis.g, *genus, "sampling produced spurious cycles");
        for _ in 0..50 {
            let target: Vec<i64> = (0..*genus).map(|_| rng.gen_range(-3..=3)).collect();
            let state = realize_class(&net, domain, &basis, &CohomClass { coeffs: target.clone() })
                .unwrap_or_else(|e| panic!("target {target:?} not realized: {e}"));
            let got = cohomology_class(&state, &net, &basis).unwrap();
            assert_eq!(got.coeffs, target);
            let trace = run(&net, &state, 5 * u64::from(state.n), None, SnapshotPolicy::Last(1));
            let after = cohomology_class(&trace.final_state, &net, &basis).unwrap();
            assert_eq!(after.coeffs, target, "class not preserved");
            targets_done += 1;
        }
    }
    assert_eq!(targets_done, 100);
    c.pass();
}

// --- criterion 5 -----------------------------------------------------------

#[test]
fn criterion_5_reference_scenario() {
    let c = Criterion::new(5, "reference scenario replication");
    let scenario = replicate_paper_scenario(None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&scenario, dir.path(), &Overrides::default(), None).unwrap();
    let summary = &out.summary;

    assert_eq!(summary["node_count"], 16250);
    assert!(
        !summary["initial_seed_nodes"].as_array().unwrap().is_empty(),
        "initial state must contain a seed"
    );

    let onset = summary["periodicity"]["max_onset"].as_u64().expect("onset reported");
    // The reference timeline milestones (wash-out around t = 45, steady
    // waves by t = 250) are qualitative; report, don't assert.
    println!("  [info] periodicity onset at tick {onset}, period {}",
        summary["periodicity"]["max_period"]);

    let awake: Vec<f64> = summary["awake_fraction"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (t, &f) in awake.iter().enumerate().skip(onset as usize) {
        assert!(
            (0.025..=0.1).contains(&f),
            "awake fraction {f:.4} at tick {t} outside [1/2n, 2/n]"
        );
    }

    let barriers: Vec<f64> = summary["barrier_fraction_per_rect"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (k, &b) in barriers.iter().enumerate() {
        assert!(b >= 0.95, "corridor {k} held a barrier only {b:.2} of the window");
    }
    c.pass();
}

// --- criterion 6 -----------------------------------------------------------

fn flood_components(cells: &CellComplex, covered: &[bool]) -> Vec<usize> {
    const COVERED: usize = usize::MAX;
    let mut label = vec![COVERED; covered.len()];
    let mut next = 0;
    for start in 0..covered.len() {
        if covered[start] || label[start] != COVERED {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(x) = stack.pop() {
            for &y in &cells.adjacency[x] {
                if !covered[y] && label[y] == COVERED {
                    label[y] = next;
                    stack.push(y);
                }
            }
        }
        next += 1;
    }
    label
}

fn verify_witness(inst: &EvasionInstance, w: &[ghm_waves::evasion::WitnessStep]) {
    let cells = inst.grid();
    let id_of = |cell: (usize, usize)| cells.coords.iter().position(|&c| c == cell).unwrap();
    for (i, step) in w.iter().enumerate() {
        let t = step.tick as usize;
        let mask = inst.coverage_mask(&cells, t);
        let id = id_of(step.cell);
        assert!(!mask[id], "witness cell covered at its own tick {t}");
        if i + 1 < w.len() {
            let next_mask = inst.coverage_mask(&cells, t + 1);
            assert!(!next_mask[id], "waiting cell covered at tick {}", t + 1);
            let label = flood_components(&cells, &next_mask);
            assert_eq!(
                label[id],
                label[id_of(w[i + 1].cell)],
                "witness transition leaves its uncovered component"
            );
        }
    }
}

/// Seeded corridor: a planted seed loop at the left end drives repeating
/// waves down a hallway narrower than √3/2·r, which sweep the evader into
/// the far wall.
fn corridor_instance(trial: u64) -> (HallwayDomain, Network, State) {
    let domain = build_domain(&[Rect::new(0.0, 0.0, 20.0, 1.2)]).unwrap();
    let n = 4u8;
    let mut positions = domain.sample_points(170, 7000 + trial);
    let mut values = vec![0u8; positions.len()];
    pin_seed(&mut positions, &mut values, [1.0, 0.6], 1.5, n);
    let net = Network::build(&positions, 1.5, 1.5);
    (domain, net, State::new(values, n))
}

#[test]
fn criterion_6_evasion_suite() {
    let c = Criterion::new(6, "evasion suite");

    // (a) randomized seeded corridors: sweep capture in >= 99% of 200.
    let mut captured = 0;
    for trial in 0..200u64 {
        let (domain, net, s0) = corridor_instance(trial);
        let trace = run(&net, &s0, 140, None, SnapshotPolicy::Full);
        let inst = EvasionInstance::from_trace(&domain, &net, &trace, 0.6, 60).unwrap();
        if matches!(inst.decide().outcome, Outcome::CapturedByTick(_)) {
            captured += 1;
        }
    }
    assert!(captured >= 198, "only {captured}/200 corridor instances captured");

    // (b) a single global wave on the annulus is evadable forever, with a
    // machine-checkable witness.
    let domain = build_domain(&annulus_frame(22.0, 2.0)).unwrap();
    let pts = domain.sample_points(760, 12);
    let net = Network::build(&pts, 1.5, 1.5);
    let basis = homology_basis(&net).unwrap();
    let wave = realize_class(&net, &domain, &basis, &CohomClass { coeffs: vec![1] }).unwrap();
    let trace = run(&net, &wave, 260, None, SnapshotPolicy::Full);
    let inst = EvasionInstance::from_trace(&domain, &net, &trace, 0.75, 40).unwrap();
    let verdict = inst.decide();
    assert!(matches!(verdict.outcome, Outcome::SurvivesForever { .. }), "{:?}", verdict.outcome);
    verify_witness(&inst, verdict.witness.as_ref().unwrap());

    // Grid-refinement stability: same verdict under two halvings of rho.
    for rho in [0.375, 0.1875] {
        let fine = EvasionInstance::from_trace(&domain, &net, &trace, rho, 40).unwrap();
        assert!(
            matches!(fine.decide().outcome, Outcome::SurvivesForever { .. }),
            "verdict flipped at rho = {rho}"
        );
    }

    // (c) nothing awake, nothing caught.
    let idle = vec![Vec::new(); 30];
    let inst = EvasionInstance::new(&domain, &net, idle, 0.75, 5).unwrap();
    assert!(matches!(inst.decide().outcome, Outcome::SurvivesForever { .. }));

    // (d) blanket coverage catches at the entry tick.
    let everyone: Vec<usize> = (0..net.node_count()).collect();
    let inst = EvasionInstance::new(&domain, &net, vec![everyone; 30], 0.75, 5).unwrap();
    assert_eq!(
        std::mem::discriminant(&inst.decide().outcome),
        std::mem::discriminant(&Outcome::CapturedByTick(5))
    );
    match inst.decide().outcome {
        Outcome::CapturedByTick(t) => assert_eq!(t, 5),
        other => panic!("{other:?}"),
    }
    c.pass();
}

// --- criterion 7 -----------------------------------------------------------

#[test]
fn criterion_7_seed_probability_trend() {
    let c = Criterion::new(7, "seed probability trend");
    let domain = build_domain(&[Rect::new(0.0, 0.0, 12.0, 12.0)]).unwrap();
    let config = MonteCarloConfig {
        trials: 80,
        seed: 7,
        n: 4,
        node_counts: vec![30, 80, 160, 320, 640],
        r: 1.5,
        eps: 1.5,
        p_s: 1.0,
        horizon: 1,
        cell_side: 1.0,
        n_tilde: 8,
        link_model: LinkModel::PerTick,
    };
    let rows = estimate_seed_probability(&domain, &config).unwrap();
    assert!(rows.len() >= 4);
    for pair in rows.windows(2) {
        // Nondecreasing within the 95% intervals: the next interval must
        // reach at least as high as the previous interval's lower end.
        assert!(
            pair[1].estimate.ci.1 >= pair[0].estimate.ci.0,
            "trend broken between {} and {} nodes",
            pair[0].node_count,
            pair[1].node_count
        );
    }
    let top = rows.last().unwrap();
    if top.analytic_lower_bound > 0.0 && top.analytic_lower_bound < 1.0 {
        assert!(
            top.estimate.fraction >= top.analytic_lower_bound,
            "estimate {} below analytic bound {}",
            top.estimate.fraction,
            top.analytic_lower_bound
        );
    }
    c.pass();
}

// --- criterion 8 -----------------------------------------------------------

#[test]
fn criterion_8_forest_structure() {
    let c = Criterion::new(8, "subordination forest structure");
    for trial in 0..200u64 {
        let (_, net, s0) = corridor_instance(trial);
        // Long enough for the wave to wash the whole corridor and for every
        // node to settle into its period.
        let trace = run(&net, &s0, 80, None, SnapshotPolicy::Full);
        let forest = subordination_forest(&net, &trace).unwrap();
        let seeds = seed_nodes_all(&s0, &net);

        // Spanning: every node is a root or hangs off a parent.
        let is_root: Vec<bool> = {
            let mut v = vec![false; net.node_count()];
            for &r in &forest.roots {
                v[r] = true;
            }
            v
        };
        for x in 0..net.node_count() {
            assert!(
                is_root[x] || forest.parent[x].is_some(),
                "node {x} dangling in trial {trial}"
            );
        }

        // Roots sit on seed loops; parent links are acyclic with
        // depth increasing away from roots.
        for &r in &forest.roots {
            assert!(seeds.contains(&r), "root {r} is not on a seed loop");
            assert_eq!(forest.depth[r], 0);
        }
        for x in 0..net.node_count() {
            if let Some((p, t_join)) = forest.parent[x] {
                assert_eq!(forest.depth[x], forest.depth[p] + 1, "depth jump at {x}");
                // Branch growth: join ticks strictly increase along any
                // root-to-leaf path, so each branch gains at most one node
                // per tick.
                if let Some((_, t_parent)) = forest.parent[p] {
                    assert!(
                        t_join > t_parent,
                        "branch through {x} grew twice at tick {t_join}"
                    );
                }
            }
        }
    }
    c.pass();
}

// --- criterion 9 -----------------------------------------------------------

#[test]
fn criterion_9_link_failure_monotonicity() {
    let c = Criterion::new(9, "link failure monotonicity");
    let n = 4u8;
    let net = cycle_network(20);
    let ring = State::new((0..20).map(|i| (i % 4) as u8).collect(), n);

    // Nondecreasing in the horizon: the same substreams decide both runs,
    // so the comparison is exact, not statistical.
    let short = defect_survival_curve(&net, &ring, 0.9, 40, 150, 5, LinkModel::PerTick).unwrap();
    let long = defect_survival_curve(&net, &ring, 0.9, 120, 150, 5, LinkModel::PerTick).unwrap();
    assert!(long.death_fraction.fraction >= short.death_fraction.fraction);

    // Nonincreasing in p_s within the 95% intervals.
    let grid = [0.8, 0.9, 0.95, 1.0];
    let curves: Vec<_> = grid
        .iter()
        .map(|&p| defect_survival_curve(&net, &ring, p, 120, 150, 5, LinkModel::PerTick).unwrap())
        .collect();
    for pair in curves.windows(2) {
        assert!(
            pair[1].death_fraction.ci.0 <= pair[0].death_fraction.ci.1,
            "death fraction rose with p_s"
        );
    }
    assert_eq!(
        curves.last().unwrap().death_fraction.fraction,
        0.0,
        "perfect links must never kill the wave"
    );
    c.pass();
}
