//! The Greenberg-Hastings automaton itself: synchronous updates over a
//! network, continuity and subordination predicates, periodicity detection,
//! the subordination forest, wavefronts, and barrier checks.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{dist, HallwayDomain, Rect};
use crate::network::Network;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("nodes {0} and {1} are not neighbors")]
    NotNeighbors(usize, usize),
    #[error("trace retains {have} snapshots, need {need}")]
    InsufficientTrace { have: usize, need: usize },
    #[error("node {0} is not n-periodic over the retained tail")]
    NotConverged(usize),
    #[error("corridor rectangle is not part of the domain decomposition")]
    BadCorridor,
}

/// A full automaton configuration: one value in `[0, n)` per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub values: Vec<u8>,
    pub n: u8,
    pub tick: u64,
}

impl State {
    pub fn new(values: Vec<u8>, n: u8) -> State {
        assert!(n >= 3, "alphabet size must be at least 3");
        assert!(values.iter().all(|&v| v < n));
        State { values, n, tick: 0 }
    }

    pub fn zero(node_count: usize, n: u8) -> State {
        State::new(vec![0; node_count], n)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Nonzero-value node set ("support" of the state).
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] != 0).collect()
    }
}

/// One synchronous update. `link_mask`, indexed by edge id, marks live links;
/// `None` means every link works. Clone nodes copy their original's new value
/// so augmentation never changes the dynamics.
pub fn step(network: &Network, state: &State, link_mask: Option<&[bool]>) -> State {
    debug_assert_eq!(state.values.len(), network.node_count());
    if let Some(mask) = link_mask {
        assert_eq!(mask.len(), network.edges.len());
    }
    let n = state.n;
    let mut next = vec![0u8; state.values.len()];
    for x in 0..state.values.len() {
        let v = state.values[x];
        next[x] = if v != 0 {
            (v + 1) % n
        } else {
            let excited = network.adjacency[x].iter().any(|&(y, e)| {
                state.values[y] == 1 && link_mask.map_or(true, |m| m[e])
            });
            u8::from(excited)
        };
    }
    for x in 0..next.len() {
        if let Some(orig) = network.clone_of[x] {
            next[x] = next[orig];
        }
    }
    State { values: next, n, tick: state.tick + 1 }
}

/// Continuity verdict with the first offending edge, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContinuityReport {
    pub continuous: bool,
    pub violating_edge: Option<(usize, usize)>,
}

/// Cyclic difference `u(j) - u(i)` folded to the balanced range; continuity
/// asks it to be -1, 0, or 1 on every edge.
pub fn cyclic_diff(a: u8, b: u8, n: u8) -> i64 {
    let d = (i64::from(b) - i64::from(a)).rem_euclid(i64::from(n));
    if d > i64::from(n) / 2 {
        d - i64::from(n)
    } else {
        d
    }
}

pub fn is_continuous(
    network: &Network,
    state: &State,
    node_subset: Option<&[usize]>,
) -> ContinuityReport {
    let members: Option<HashSet<usize>> = node_subset.map(|s| s.iter().copied().collect());
    for &(i, j) in &network.edges {
        if let Some(m) = &members {
            if !m.contains(&i) || !m.contains(&j) {
                continue;
            }
        }
        let d = (i64::from(state.values[j]) - i64::from(state.values[i]))
            .rem_euclid(i64::from(state.n));
        if d != 0 && d != 1 && d != i64::from(state.n) - 1 {
            return ContinuityReport { continuous: false, violating_edge: Some((i, j)) };
        }
    }
    ContinuityReport { continuous: true, violating_edge: None }
}

/// Is `y` one step ahead of its neighbor `x` (u(y) = u(x)+1 mod n)?
pub fn is_subordinate(
    network: &Network,
    state: &State,
    x: usize,
    y: usize,
) -> Result<bool, EngineError> {
    if !network.are_neighbors(x, y) {
        return Err(EngineError::NotNeighbors(x, y));
    }
    Ok(state.values[y] == (state.values[x] + 1) % state.n)
}

/// Per-tick i.i.d. link failure: each edge is live with probability `p_s`.
#[derive(Debug, Clone, Copy)]
pub struct LinkFailure {
    pub p_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    /// Keep every configuration, including the initial one.
    Full,
    /// Keep only the most recent `k` configurations.
    Last(usize),
    /// Keep none (events only).
    None,
}

#[derive(Debug, Clone)]
pub struct TickEvent {
    pub tick: u64,
    /// Nodes that moved 0 -> 1 at this tick.
    pub fired: Vec<usize>,
    /// Nodes that held at 0 (the set S_t).
    pub stalled: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub initial: State,
    pub events: Vec<TickEvent>,
    /// Retained configurations in tick order, per the snapshot policy.
    pub snapshots: Vec<State>,
    pub final_state: State,
}

impl RunTrace {
    pub fn snapshot_at(&self, tick: u64) -> Option<&State> {
        self.snapshots.iter().find(|s| s.tick == tick)
    }
}

pub fn run(
    network: &Network,
    initial: &State,
    ticks: u64,
    link_failure: Option<LinkFailure>,
    snapshots: SnapshotPolicy,
) -> RunTrace {
    let mut rng = link_failure.map(|lf| ChaCha8Rng::seed_from_u64(lf.seed));
    let mut mask = vec![true; network.edges.len()];
    let mut state = initial.clone();
    let mut events = Vec::with_capacity(ticks as usize);
    let mut kept: Vec<State> = Vec::new();
    let keep = |kept: &mut Vec<State>, s: &State| match snapshots {
        SnapshotPolicy::Full => kept.push(s.clone()),
        SnapshotPolicy::Last(k) => {
            kept.push(s.clone());
            if kept.len() > k {
                kept.remove(0);
            }
        }
        SnapshotPolicy::None => {}
    };
    keep(&mut kept, &state);
    for _ in 0..ticks {
        let m = match (&mut rng, link_failure) {
            (Some(rng), Some(lf)) if lf.p_s < 1.0 => {
                for live in mask.iter_mut() {
                    *live = rng.gen::<f64>() < lf.p_s;
                }
                Some(mask.as_slice())
            }
            _ => None,
        };
        let next = step(network, &state, m);
        let mut fired = Vec::new();
        let mut stalled = Vec::new();
        for x in 0..state.values.len() {
            if state.values[x] == 0 {
                if next.values[x] == 1 {
                    fired.push(x);
                } else {
                    stalled.push(x);
                }
            }
        }
        events.push(TickEvent { tick: state.tick, fired, stalled });
        state = next;
        keep(&mut kept, &state);
    }
    RunTrace { initial: initial.clone(), events, snapshots: kept, final_state: state }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodReport {
    pub eventually_periodic: bool,
    pub period: Option<u64>,
    /// First retained tick from which the reported period holds to the end.
    pub onset: Option<u64>,
}

/// Smallest K <= window consistent across the retained tail of the trace.
pub fn detect_periodicity(
    trace: &RunTrace,
    window: u64,
) -> Result<Vec<PeriodReport>, EngineError> {
    let need = (2 * window) as usize;
    if trace.snapshots.len() < need {
        return Err(EngineError::InsufficientTrace { have: trace.snapshots.len(), need });
    }
    let snaps = &trace.snapshots;
    let tail = &snaps[snaps.len() - need..];
    let nodes = trace.initial.values.len();
    let mut out = Vec::with_capacity(nodes);
    for x in 0..nodes {
        let mut found = None;
        for k in 1..=window as usize {
            if (0..need - k).all(|t| tail[t].values[x] == tail[t + k].values[x]) {
                found = Some(k as u64);
                break;
            }
        }
        match found {
            None => out.push(PeriodReport { eventually_periodic: false, period: None, onset: None }),
            Some(k) => {
                // Walk back through all retained snapshots for the onset.
                let ku = k as usize;
                let mut onset_idx = snaps.len() - need;
                while onset_idx > 0 {
                    let prev = onset_idx - 1;
                    if prev + ku < snaps.len() && snaps[prev].values[x] == snaps[prev + ku].values[x]
                    {
                        onset_idx = prev;
                    } else {
                        break;
                    }
                }
                out.push(PeriodReport {
                    eventually_periodic: true,
                    period: Some(k),
                    onset: Some(snaps[onset_idx].tick),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Forest {
    /// Per node: parent id and the tick of permanent subordination.
    pub parent: Vec<Option<(usize, u64)>>,
    pub roots: Vec<usize>,
    pub depth: Vec<usize>,
}

/// Build the subordination forest from a fully retained trace. Requires
/// every node n-periodic over the retained tail.
pub fn subordination_forest(network: &Network, trace: &RunTrace) -> Result<Forest, EngineError> {
    let n = trace.initial.n as u64;
    let need = (2 * n) as usize;
    if trace.snapshots.len() < need {
        return Err(EngineError::InsufficientTrace { have: trace.snapshots.len(), need });
    }
    let snaps = &trace.snapshots;
    let nodes = trace.initial.values.len();

    // Per-node n-periodicity onset: first retained tick from which
    // u_{t+n} = u_t holds through the end of the trace.
    let mut onset = vec![None; nodes];
    for x in 0..nodes {
        let mut idx = snaps.len();
        for i in (0..snaps.len()).rev() {
            if i + n as usize >= snaps.len()
                || snaps[i].values[x] == snaps[i + n as usize].values[x]
            {
                idx = i;
            } else {
                break;
            }
        }
        if snaps.len() - idx < need {
            return Err(EngineError::NotConverged(x));
        }
        onset[x] = Some(snaps[idx].tick);
    }

    // Roots: nodes on seed loops, unioned across retained configurations.
    let mut root_set: HashSet<usize> = HashSet::new();
    for s in snaps {
        for x in crate::topology::seed_nodes_all(s, network) {
            root_set.insert(x);
        }
    }
    let mut roots: Vec<usize> = root_set.iter().copied().collect();
    roots.sort_unstable();

    let mut parent: Vec<Option<(usize, u64)>> = vec![None; nodes];
    for s in snaps {
        for x in 0..nodes {
            if root_set.contains(&x) || parent[x].is_some() {
                continue;
            }
            // Smallest-id periodic neighbor one step ahead at this tick.
            let cand = network
                .adjacency[x]
                .iter()
                .map(|&(y, _)| y)
                .filter(|&y| {
                    onset[y].unwrap() <= s.tick
                        && s.values[y] == (s.values[x] + 1) % s.n
                })
                .min();
            if let Some(y) = cand {
                parent[x] = Some((y, s.tick));
            }
        }
    }
    for x in 0..nodes {
        if !root_set.contains(&x) && parent[x].is_none() {
            return Err(EngineError::NotConverged(x));
        }
    }

    // Depths by following parents; cycles would mean a logic error upstream.
    let mut depth = vec![usize::MAX; nodes];
    for &r in &roots {
        depth[r] = 0;
    }
    let depth_of = |x: usize, depth: &mut Vec<usize>| {
        let mut chain = Vec::new();
        let mut cur = x;
        while depth[cur] == usize::MAX {
            chain.push(cur);
            cur = parent[cur].expect("non-root has a parent").0;
            assert!(!chain.contains(&cur), "subordination parents must be acyclic");
        }
        let mut d = depth[cur];
        for &c in chain.iter().rev() {
            d += 1;
            depth[c] = d;
        }
    };
    for x in 0..nodes {
        if depth[x] == usize::MAX {
            depth_of(x, &mut depth);
        }
    }
    Ok(Forest { parent, roots, depth })
}

/// Nodes currently at state 0.
pub fn wavefront(state: &State) -> Vec<usize> {
    (0..state.values.len()).filter(|&x| state.values[x] == 0).collect()
}

/// Nodes at hop distance `k` from the roots.
pub fn depth_level(forest: &Forest, k: usize) -> Vec<usize> {
    (0..forest.depth.len()).filter(|&x| forest.depth[x] == k).collect()
}

/// Does the ε-disk union of `node_set` cut the corridor wall-to-wall?
///
/// The two walls are the corridor's long sides; connectivity is decided on
/// the disk-overlap graph plus two virtual wall vertices.
pub fn is_barrier(
    network: &Network,
    node_set: &[usize],
    domain: &HallwayDomain,
    corridor: &Rect,
) -> Result<bool, EngineError> {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let member = domain.decomposition().iter().chain(domain.rects.iter()).any(|r| {
        close(r.xmin, corridor.xmin)
            && close(r.ymin, corridor.ymin)
            && close(r.xmax, corridor.xmax)
            && close(r.ymax, corridor.ymax)
    });
    if !member {
        return Err(EngineError::BadCorridor);
    }
    let eps = network.coverage_radius;
    let horizontal = corridor.width() >= corridor.height();
    // Distance from a point in the corridor to each long wall.
    let wall_dists = |p: [f64; 2]| -> (f64, f64) {
        if horizontal {
            (p[1] - corridor.ymin, corridor.ymax - p[1])
        } else {
            (p[0] - corridor.xmin, corridor.xmax - p[0])
        }
    };
    let inside: Vec<usize> = node_set
        .iter()
        .copied()
        .filter(|&x| corridor.contains(network.coverage_center(x)))
        .collect();
    if inside.is_empty() {
        return Ok(false);
    }
    // Union-find over nodes plus wall A (index m) and wall B (index m+1).
    let m = inside.len();
    let mut uf: Vec<usize> = (0..m + 2).collect();
    fn find(uf: &mut Vec<usize>, mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let union = |uf: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(uf, a), find(uf, b));
        if ra != rb {
            uf[ra] = rb;
        }
    };
    for (ai, &a) in inside.iter().enumerate() {
        let pa = network.coverage_center(a);
        let (da, db) = wall_dists(pa);
        if da <= eps {
            union(&mut uf, ai, m);
        }
        if db <= eps {
            union(&mut uf, ai, m + 1);
        }
        for (bi, &b) in inside.iter().enumerate().skip(ai + 1) {
            if dist(pa, network.coverage_center(b)) <= 2.0 * eps {
                union(&mut uf, ai, bi);
            }
        }
    }
    Ok(find(&mut uf, m) == find(&mut uf, m + 1))
}

/// Snapshot rows `tick,node_id,state` for each retained configuration.
pub fn write_snapshots_csv<W: Write>(trace: &RunTrace, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "tick,node_id,state")?;
    for s in &trace.snapshots {
        for (i, &v) in s.values.iter().enumerate() {
            writeln!(out, "{},{},{}", s.tick, i, v)?;
        }
    }
    Ok(())
}

/// Event log as JSON lines: `{"tick":..,"fired":[..],"stalled_count":..}`.
pub fn write_events_jsonl<W: Write>(trace: &RunTrace, out: &mut W) -> std::io::Result<()> {
    for e in &trace.events {
        let line = serde_json::json!({
            "tick": e.tick,
            "fired": e.fired,
            "stalled_count": e.stalled.len(),
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// A cycle graph C_k on the unit circle with consecutive edges only.
pub fn cycle_network(k: usize) -> Network {
    let pts: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            let a = i as f64 / k as f64 * std::f64::consts::TAU;
            [a.cos(), a.sin()]
        })
        .collect();
    let edges: Vec<(usize, usize)> = (0..k).map(|i| (i, (i + 1) % k)).collect();
    Network::from_edge_list(&pts, &edges, 1.0, 1.0)
}
