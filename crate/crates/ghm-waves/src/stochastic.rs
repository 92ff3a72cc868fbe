//! Monte Carlo estimators for the probabilistic side of the theory: how
//! likely random initial conditions are to contain seeds, whether nodes far
//! from every defect shut down on schedule, and how long defects survive
//! when links drop packets.
//!
//! Every estimator is deterministic given its config: trial k draws from an
//! independent substream derived from (config seed, estimator tag, k), so
//! results are reproducible and independent of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{run, LinkFailure, SnapshotPolicy, State};
use crate::geometry::HallwayDomain;
use crate::network::Network;
use crate::topology::{find_seed, homology_basis, seed_nodes_all};

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("node_counts is empty")]
    NoNodeCounts,
    #[error("cell side {side} exceeds r/sqrt(2) = {max}")]
    CellTooLarge { side: f64, max: f64 },
    #[error("link success probability {0} outside (0, 1]")]
    BadLinkProbability(f64),
    #[error("initial state contains no seed to track")]
    NoInitialDefect,
}

/// How link failures persist: a fresh coin per edge per tick, or one coin
/// per edge for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkModel {
    PerTick,
    PerLifetime,
}

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub seed: u64,
    pub n: u8,
    pub node_counts: Vec<usize>,
    /// Communication radius.
    pub r: f64,
    /// Coverage radius ε.
    pub eps: f64,
    pub p_s: f64,
    /// Horizon in ticks where an estimator needs one.
    pub horizon: u64,
    /// Side of the grid cells in the seed-probability bound; must not
    /// exceed r/√2 so that any cycle of occupied cells is a network cycle.
    pub cell_side: f64,
    /// Neighbor-count cap Ñ quoted by the die-out bound.
    pub n_tilde: u32,
    pub link_model: LinkModel,
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<(), StochasticError> {
        if self.trials == 0 {
            return Err(StochasticError::NoTrials);
        }
        if self.node_counts.is_empty() {
            return Err(StochasticError::NoNodeCounts);
        }
        let max = self.r / f64::sqrt(2.0);
        if self.cell_side > max {
            return Err(StochasticError::CellTooLarge { side: self.cell_side, max });
        }
        if !(self.p_s > 0.0 && self.p_s <= 1.0) {
            return Err(StochasticError::BadLinkProbability(self.p_s));
        }
        Ok(())
    }
}

/// A binomial estimate with its 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub successes: usize,
    pub trials: usize,
    pub fraction: f64,
    pub ci: (f64, f64),
}

impl Estimate {
    pub fn from_counts(successes: usize, trials: usize) -> Estimate {
        Estimate {
            successes,
            trials,
            fraction: successes as f64 / trials as f64,
            ci: wilson(successes, trials),
        }
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson(successes: usize, trials: usize) -> (f64, f64) {
    let z = 1.959_964f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// SplitMix64 over the xor of config seed and stream labels: cheap
/// splittable substreams for independent trials.
fn substream(seed: u64, tag: u64, trial: u64) -> u64 {
    let mut z = seed
        ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ trial.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn uniform_state(rng: &mut ChaCha8Rng, nodes: usize, n: u8) -> State {
    State::new((0..nodes).map(|_| rng.gen_range(0..n)).collect(), n)
}

/// Number of `cell_side` grid cells needed to cover the domain; the |I| of
/// the analytic seed bound.
pub fn cover_cell_count(domain: &HallwayDomain, cell_side: f64) -> usize {
    let bb = domain.bounding_box();
    let nx = (bb.width() / cell_side).ceil() as usize;
    let ny = (bb.height() / cell_side).ceil() as usize;
    let mut count = 0;
    for iy in 0..ny {
        for ix in 0..nx {
            let c = [
                bb.xmin + (ix as f64 + 0.5) * cell_side,
                bb.ymin + (iy as f64 + 0.5) * cell_side,
            ];
            if domain.contains(c) {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone)]
pub struct SeedProbability {
    pub node_count: usize,
    pub estimate: Estimate,
    /// max(0, 1 − n^{|I|} (1 − 1/n)^{|X|}); the unclamped expression is far
    /// below 0 for small networks, where it carries no information.
    pub analytic_lower_bound: f64,
    pub cell_count: usize,
}

/// Probability that a uniform random state on a uniform random network of
/// each size contains a seed.
pub fn estimate_seed_probability(
    domain: &HallwayDomain,
    config: &MonteCarloConfig,
) -> Result<Vec<SeedProbability>, StochasticError> {
    config.validate()?;
    let cell_count = cover_cell_count(domain, config.cell_side);
    let n = f64::from(config.n);
    let mut out = Vec::with_capacity(config.node_counts.len());
    for (mi, &m) in config.node_counts.iter().enumerate() {
        let mut successes = 0;
        for trial in 0..config.trials {
            let key = substream(config.seed, 0x5eed << 8 | mi as u64, trial as u64);
            let pts = domain.sample_points(m, key);
            let net = Network::build(&pts, config.r, config.eps);
            let mut rng = ChaCha8Rng::seed_from_u64(substream(key, 1, 0));
            let state = uniform_state(&mut rng, m, config.n);
            if find_seed(&state, &net).is_some() {
                successes += 1;
            }
        }
        let bound = (1.0
            - f64::exp(cell_count as f64 * n.ln() + m as f64 * (1.0 - 1.0 / n).ln()))
        .max(0.0);
        out.push(SeedProbability {
            node_count: m,
            estimate: Estimate::from_counts(successes, config.trials),
            analytic_lower_bound: bound,
            cell_count,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DieoutEstimate {
    pub estimate: Estimate,
    /// |X| (1 − (1/2)^Ñ)^{(n−1)/2}, quoted for reference only.
    pub analytic_bound: f64,
}

/// Fraction of random instances in which every node farther than 2n hops
/// from all detected defects is back at state 0 after 2n − 2 ticks.
pub fn estimate_far_node_dieout(
    domain: &HallwayDomain,
    config: &MonteCarloConfig,
) -> Result<DieoutEstimate, StochasticError> {
    config.validate()?;
    let m = *config.node_counts.last().unwrap();
    let n = config.n;
    let ticks = u64::from(n).max(2 * u64::from(n) - 2);
    let mut successes = 0;
    for trial in 0..config.trials {
        let key = substream(config.seed, 0xd1e, trial as u64);
        let pts = domain.sample_points(m, key);
        let net = Network::build(&pts, config.r, config.eps);
        let mut rng = ChaCha8Rng::seed_from_u64(substream(key, 1, 0));
        let state = uniform_state(&mut rng, m, n);
        let trace = run(&net, &state, ticks, None, SnapshotPolicy::Full);

        // Defect inventory: every node on a successor-digraph loop during
        // the first n ticks, plus every node on a basis cycle whose degree
        // is nonzero (or unreadable through a discontinuity).
        let mut sources: Vec<bool> = vec![false; m];
        for t in 0..=u64::from(n) {
            if let Some(s) = trace.snapshot_at(t) {
                for i in seed_nodes_all(s, &net) {
                    sources[i] = true;
                }
            }
        }
        if let Ok(basis) = homology_basis(&net) {
            for cycle in &basis.basis_cycles {
                let deg = crate::topology::degree(&net, &state, cycle);
                if !matches!(deg, Ok(0)) {
                    for &(i, j) in cycle.terms.keys() {
                        sources[i] = true;
                        sources[j] = true;
                    }
                }
            }
        }
        // Hop distances from the defect set.
        let mut dist = vec![u64::MAX; m];
        let mut queue: std::collections::VecDeque<usize> = (0..m)
            .filter(|&i| sources[i])
            .inspect(|&i| dist[i] = 0)
            .collect();
        while let Some(i) = queue.pop_front() {
            for j in net.neighbors(i) {
                if dist[j] == u64::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        let check = trace.snapshot_at(2 * u64::from(n) - 2).unwrap();
        let ok = (0..m).all(|i| dist[i] <= 2 * u64::from(n) || check.values[i] == 0);
        if ok {
            successes += 1;
        }
    }
    let bound = m as f64
        * (1.0 - 0.5f64.powi(config.n_tilde as i32)).powf((f64::from(n) - 1.0) / 2.0);
    Ok(DieoutEstimate {
        estimate: Estimate::from_counts(successes, config.trials),
        analytic_bound: bound,
    })
}

#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    pub p_s: f64,
    pub horizon: u64,
    pub death_fraction: Estimate,
    /// `deaths_by_tick[t]` counts trials whose last seed disappeared at
    /// tick t (first seedless snapshot).
    pub deaths_by_tick: Vec<usize>,
}

/// How often a defect-sustained wave dies under lossy links: fraction of
/// runs with no seed left at the horizon, plus the death-time histogram.
pub fn defect_survival_curve(
    network: &Network,
    initial: &State,
    p_s: f64,
    horizon: u64,
    trials: usize,
    seed: u64,
    link_model: LinkModel,
) -> Result<SurvivalCurve, StochasticError> {
    if trials == 0 {
        return Err(StochasticError::NoTrials);
    }
    if !(p_s > 0.0 && p_s <= 1.0) {
        return Err(StochasticError::BadLinkProbability(p_s));
    }
    if find_seed(initial, network).is_none() {
        return Err(StochasticError::NoInitialDefect);
    }
    let mut deaths_by_tick = vec![0usize; horizon as usize + 1];
    let mut dead = 0;
    for trial in 0..trials {
        let key = substream(seed, 0xcafe, trial as u64);
        let trace = match link_model {
            LinkModel::PerTick => run(
                network,
                initial,
                horizon,
                Some(LinkFailure { p_s, seed: key }),
                SnapshotPolicy::Full,
            ),
            LinkModel::PerLifetime => {
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                let drop: std::collections::HashSet<(usize, usize)> = network
                    .edges
                    .iter()
                    .copied()
                    .filter(|_| !rng.gen_bool(p_s))
                    .collect();
                let thinned = network.remove_edges(&drop);
                run(&thinned, initial, horizon, None, SnapshotPolicy::Full)
            }
        };
        let death = (0..=horizon)
            .find(|&t| find_seed(trace.snapshot_at(t).unwrap(), network).is_none());
        if let Some(t) = death {
            deaths_by_tick[t as usize] += 1;
        }
        if find_seed(trace.snapshot_at(horizon).unwrap(), network).is_none() {
            dead += 1;
        }
    }
    Ok(SurvivalCurve {
        p_s,
        horizon,
        death_fraction: Estimate::from_counts(dead, trials),
        deaths_by_tick,
    })
}
