//! The pursuit/evasion game against the awake-node schedule.
//!
//! The pursuer is the sensor network running its automaton: at each tick the
//! awake (state-0) nodes watch their coverage disks.  The evader moves with
//! unbounded speed and wins by staying out of coverage forever.  We decide
//! the game on a conservative grid discretization of the domain: per tick we
//! take the connected components of the uncovered region, and a transition
//! between consecutive ticks is allowed exactly when the two components
//! share a cell (the evader waits there across the tick boundary).

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::Serialize;
use thiserror::Error;

use crate::engine::RunTrace;
use crate::geometry::{dist, HallwayDomain, Point, Rect};
use crate::network::{GridHash, Network};

#[derive(Debug, Error)]
pub enum EvasionError {
    /// Cell centers only approximate disk containment; above ε/2 the grid
    /// can hallucinate corridors through covered territory.
    #[error("grid resolution {rho} too coarse for coverage radius {eps} (need <= eps/2)")]
    ResolutionTooCoarse { rho: f64, eps: f64 },
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("entry tick {entry} is at or past the schedule horizon {horizon}")]
    EntryBeyondHorizon { entry: u64, horizon: u64 },
    #[error("trace lacks a snapshot for tick {0}; rerun with SnapshotPolicy::Full")]
    MissingSnapshot(u64),
}

/// One instance of the game: who is awake when, at what granularity the
/// uncovered region is tracked, and where the evader is allowed to be.
pub struct EvasionInstance<'a> {
    pub domain: &'a HallwayDomain,
    pub network: &'a Network,
    /// Awake node ids per tick, t = 0..T.
    pub schedule: Vec<Vec<usize>>,
    /// Fingerprint of the automaton configuration per tick; two equal keys
    /// mean the deterministic future coincides, which is what makes the
    /// recurrence proof of `SurvivesForever` sound.
    pub state_keys: Vec<u64>,
    /// Grid resolution ρ.
    pub rho: f64,
    /// Tick at which the evader enters.
    pub entry_tick: u64,
    /// Tested subdomain: restrict play to these rectangles (None = whole
    /// domain).
    pub region: Option<Vec<Rect>>,
}

fn hash_awake(awake: &[usize]) -> u64 {
    let mut sorted = awake.to_vec();
    sorted.sort_unstable();
    let mut h = DefaultHasher::new();
    sorted.hash(&mut h);
    h.finish()
}

impl<'a> EvasionInstance<'a> {
    /// Instance from an explicit awake schedule; state keys fall back to
    /// hashes of the awake sets themselves.
    pub fn new(
        domain: &'a HallwayDomain,
        network: &'a Network,
        schedule: Vec<Vec<usize>>,
        rho: f64,
        entry_tick: u64,
    ) -> Result<Self, EvasionError> {
        let eps = network.coverage_radius;
        if rho > eps / 2.0 {
            return Err(EvasionError::ResolutionTooCoarse { rho, eps });
        }
        if schedule.is_empty() {
            return Err(EvasionError::EmptySchedule);
        }
        if entry_tick >= schedule.len() as u64 {
            return Err(EvasionError::EntryBeyondHorizon {
                entry: entry_tick,
                horizon: schedule.len() as u64,
            });
        }
        let state_keys = schedule.iter().map(|a| hash_awake(a)).collect();
        Ok(EvasionInstance {
            domain,
            network,
            schedule,
            state_keys,
            rho,
            entry_tick,
            region: None,
        })
    }

    /// Instance whose schedule is the wavefront u⁻¹(0) of a recorded run.
    /// Needs full snapshots so each tick's configuration can be
    /// fingerprinted exactly.
    pub fn from_trace(
        domain: &'a HallwayDomain,
        network: &'a Network,
        trace: &RunTrace,
        rho: f64,
        entry_tick: u64,
    ) -> Result<Self, EvasionError> {
        let horizon = trace.final_state.tick + 1;
        let mut schedule = Vec::with_capacity(horizon as usize);
        let mut state_keys = Vec::with_capacity(horizon as usize);
        for t in 0..horizon {
            let s = trace
                .snapshot_at(t)
                .ok_or(EvasionError::MissingSnapshot(t))?;
            let awake: Vec<usize> = (0..s.values.len()).filter(|&i| s.values[i] == 0).collect();
            let mut h = DefaultHasher::new();
            s.values.hash(&mut h);
            state_keys.push(h.finish());
            schedule.push(awake);
        }
        let mut inst = Self::new(domain, network, schedule, rho, entry_tick)?;
        inst.state_keys = state_keys;
        Ok(inst)
    }

    fn in_region(&self, p: Point) -> bool {
        self.region
            .as_ref()
            .is_none_or(|rs| rs.iter().any(|r| r.contains(p)))
    }

    /// Square-grid cells over the playable area, 4-connected.
    pub fn grid(&self) -> CellComplex {
        let bb = self.domain.bounding_box();
        let nx = ((bb.width() / self.rho).ceil() as usize).max(1);
        let ny = ((bb.height() / self.rho).ceil() as usize).max(1);
        let mut centers = Vec::new();
        let mut coords = Vec::new();
        let mut id_of: HashMap<(usize, usize), usize> = HashMap::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let c = [
                    bb.xmin + (ix as f64 + 0.5) * self.rho,
                    bb.ymin + (iy as f64 + 0.5) * self.rho,
                ];
                if self.domain.contains(c) && self.in_region(c) {
                    id_of.insert((ix, iy), centers.len());
                    centers.push(c);
                    coords.push((ix, iy));
                }
            }
        }
        let mut adj = vec![Vec::new(); centers.len()];
        for (&(ix, iy), &id) in &id_of {
            for (jx, jy) in [(ix + 1, iy), (ix, iy + 1)] {
                if let Some(&jd) = id_of.get(&(jx, jy)) {
                    adj[id].push(jd);
                    adj[jd].push(id);
                }
            }
        }
        CellComplex { centers, coords, adjacency: adj }
    }

    /// 1-d cells along the skeleton centerline: each edge is split into arc
    /// segments of length ≤ ρ, chained in order and joined at shared
    /// skeleton vertices.
    pub fn skeleton_cells(&self) -> CellComplex {
        let sk = &self.domain.skeleton;
        let mut centers = Vec::new();
        let mut coords = Vec::new();
        let mut adj: Vec<Vec<usize>> = Vec::new();
        // Cells per edge plus the edge-end cell ids touching each vertex.
        let mut at_vertex: Vec<Vec<usize>> = vec![Vec::new(); sk.vertices.len()];
        for (ei, e) in sk.edges.iter().enumerate() {
            let va = sk.vertices[e.a];
            let vb = sk.vertices[e.b];
            let len = e.length();
            let count = ((len / self.rho).ceil() as usize).max(1);
            let mut prev: Option<usize> = None;
            let mut first: Option<usize> = None;
            for k in 0..count {
                let t = (k as f64 + 0.5) / count as f64;
                let c = [va[0] + t * (vb[0] - va[0]), va[1] + t * (vb[1] - va[1])];
                if !self.in_region(c) {
                    prev = None;
                    continue;
                }
                let id = centers.len();
                centers.push(c);
                coords.push((ei, k));
                adj.push(Vec::new());
                if let Some(p) = prev {
                    adj[p].push(id);
                    adj[id].push(p);
                }
                if k == 0 {
                    first = Some(id);
                }
                prev = Some(id);
            }
            if let Some(f) = first {
                at_vertex[e.a].push(f);
            }
            if let Some(l) = prev {
                if coords[l].1 == count - 1 {
                    at_vertex[e.b].push(l);
                }
            }
        }
        for ends in &at_vertex {
            for i in 0..ends.len() {
                for j in i + 1..ends.len() {
                    adj[ends[i]].push(ends[j]);
                    adj[ends[j]].push(ends[i]);
                }
            }
        }
        CellComplex { centers, coords, adjacency: adj }
    }

    /// Covered flags per cell for one tick: a cell is covered when its
    /// center lies within ε of some awake node's coverage disk center.
    pub fn coverage_mask(&self, cells: &CellComplex, tick: usize) -> Vec<bool> {
        let eps = self.network.coverage_radius;
        let awake = &self.schedule[tick];
        if awake.is_empty() {
            return vec![false; cells.centers.len()];
        }
        let centers: Vec<Point> = awake
            .iter()
            .map(|&i| self.network.coverage_center(i))
            .collect();
        let hash = GridHash::build(&centers, eps);
        cells
            .centers
            .iter()
            .map(|&c| hash.near(c).any(|k| dist(centers[k], c) <= eps))
            .collect()
    }

    /// Decide the game on the 2-d grid.
    pub fn decide(&self) -> Verdict {
        decide_on(self, &self.grid())
    }

    /// Decide the game on the skeleton's 1-d cell decomposition.
    pub fn decide_1d(&self) -> Verdict {
        decide_on(self, &self.skeleton_cells())
    }

    /// Refinement loop: halve ρ until the outcome is unchanged twice in a
    /// row, and return that stable verdict (with the resolution it used).
    pub fn decide_stable(&self) -> Verdict {
        let mut rho = self.rho;
        let mut verdict = self.decide();
        let mut streak = 0;
        for _ in 0..6 {
            if streak >= 2 {
                break;
            }
            rho /= 2.0;
            let refined = EvasionInstance {
                domain: self.domain,
                network: self.network,
                schedule: self.schedule.clone(),
                state_keys: self.state_keys.clone(),
                rho,
                entry_tick: self.entry_tick,
                region: self.region.clone(),
            };
            let v = refined.decide();
            if v.outcome == verdict.outcome {
                streak += 1;
            } else {
                streak = 0;
            }
            verdict = v;
        }
        verdict
    }
}

/// A cell decomposition of the playable space: cell centers, integer cell
/// coordinates for reporting, and the adjacency used for flood fills.
pub struct CellComplex {
    pub centers: Vec<Point>,
    /// `(ix, iy)` grid coordinates in 2-d, `(edge, slot)` in 1-d.
    pub coords: Vec<(usize, usize)>,
    pub adjacency: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// First tick at which the evader's reachable set is empty.
    CapturedByTick(u64),
    /// Schedule exhausted with the evader still alive; no recurrence found.
    SurvivesHorizon(u64),
    /// The pair (configuration, reachable set) recurred: the game loops.
    SurvivesForever { first: u64, second: u64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WitnessStep {
    pub tick: u64,
    pub cell: (usize, usize),
    pub position: Point,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub resolution: f64,
    /// One safe cell per tick; consecutive steps share an uncovered cell
    /// (each step's cell is itself uncovered at the next tick too).
    pub witness: Option<Vec<WitnessStep>>,
}

/// Per-tick component labelling of the uncovered cells.
struct Slice {
    /// Component id per cell; `u32::MAX` marks covered cells.
    label: Vec<u32>,
    comp_count: u32,
    reachable: Vec<bool>,
    /// For each reachable component: (component at previous tick, shared
    /// cell) that let the evader in.
    pred: Vec<Option<(u32, usize)>>,
}

const COVERED: u32 = u32::MAX;

fn label_components(cells: &CellComplex, mask: &[bool]) -> (Vec<u32>, u32) {
    let mut label = vec![COVERED; mask.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if mask[start] || label[start] != COVERED {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(c) = stack.pop() {
            for &d in &cells.adjacency[c] {
                if !mask[d] && label[d] == COVERED {
                    label[d] = next;
                    stack.push(d);
                }
            }
        }
        next += 1;
    }
    (label, next)
}

fn decide_on(inst: &EvasionInstance, cells: &CellComplex) -> Verdict {
    let t0 = inst.entry_tick as usize;
    let horizon = inst.schedule.len();
    let mut slices: Vec<Slice> = Vec::with_capacity(horizon - t0);
    let mut seen: HashMap<(u64, u64), u64> = HashMap::new();

    for t in t0..horizon {
        let mask = inst.coverage_mask(cells, t);
        let (label, comp_count) = label_components(cells, &mask);
        let mut reachable = vec![false; comp_count as usize];
        let mut pred: Vec<Option<(u32, usize)>> = vec![None; comp_count as usize];
        if t == t0 {
            // The evader picks any uncovered entry point.
            reachable.iter_mut().for_each(|r| *r = true);
        } else {
            let prev = slices.last().unwrap();
            for c in 0..label.len() {
                let (here, there) = (label[c], prev.label[c]);
                if here != COVERED
                    && there != COVERED
                    && prev.reachable[there as usize]
                    && !reachable[here as usize]
                {
                    reachable[here as usize] = true;
                    pred[here as usize] = Some((there, c));
                }
            }
        }
        if !reachable.iter().any(|&r| r) {
            // Independent re-check of the capture claim: no uncovered cell
            // may admit a waiting transition from the previous slice.
            if let Some(prev) = slices.last() {
                for c in 0..label.len() {
                    debug_assert!(
                        label[c] == COVERED
                            || prev.label[c] == COVERED
                            || !prev.reachable[prev.label[c] as usize],
                        "capture verdict contradicted by cell {c}"
                    );
                }
            }
            return Verdict {
                outcome: Outcome::CapturedByTick(t as u64),
                resolution: inst.rho,
                witness: None,
            };
        }
        let slice = Slice { label, comp_count, reachable, pred };
        let key = (inst.state_keys[t], reachable_fingerprint(&slice));
        slices.push(slice);
        if let Some(&first) = seen.get(&key) {
            let witness = backtrack(cells, &slices, t0 as u64);
            return Verdict {
                outcome: Outcome::SurvivesForever { first, second: t as u64 },
                resolution: inst.rho,
                witness: Some(witness),
            };
        }
        seen.insert(key, t as u64);
    }
    let witness = backtrack(cells, &slices, t0 as u64);
    Verdict {
        outcome: Outcome::SurvivesHorizon(horizon as u64),
        resolution: inst.rho,
        witness: Some(witness),
    }
}

fn reachable_fingerprint(slice: &Slice) -> u64 {
    let mut h = DefaultHasher::new();
    for c in 0..slice.label.len() {
        let alive =
            slice.label[c] != COVERED && slice.reachable[slice.label[c] as usize];
        alive.hash(&mut h);
    }
    h.finish()
}

/// Reconstruct one safe trajectory: walk the predecessor links back from any
/// component alive in the last slice, recording the shared waiting cell of
/// each transition.
fn backtrack(cells: &CellComplex, slices: &[Slice], t0: u64) -> Vec<WitnessStep> {
    let last = slices.last().expect("witness of an empty game");
    let mut comp = (0..last.comp_count)
        .find(|&k| last.reachable[k as usize])
        .expect("surviving verdict without a reachable component");
    let mut steps: Vec<WitnessStep> = Vec::with_capacity(slices.len());
    // Final resting cell: any cell of the last component.
    let final_cell = (0..last.label.len())
        .find(|&c| last.label[c] == comp)
        .expect("component without cells");
    steps.push(WitnessStep {
        tick: t0 + slices.len() as u64 - 1,
        cell: cells.coords[final_cell],
        position: cells.centers[final_cell],
    });
    for idx in (1..slices.len()).rev() {
        let (prev_comp, cell) = slices[idx].pred[comp as usize]
            .expect("reachable component without a predecessor");
        steps.push(WitnessStep {
            tick: t0 + idx as u64 - 1,
            cell: cells.coords[cell],
            position: cells.centers[cell],
        });
        comp = prev_comp;
    }
    steps.reverse();
    steps
}
