//! Scenario files, experiment orchestration, and the on-disk data formats.
//!
//! A scenario is a JSON description of one experiment: the hallway
//! rectangles, how to get nodes (sampled, inline, or from CSV), automaton
//! parameters, the initial state (uniform random, explicit, a programmed
//! cohomology class, or explicit wave specs), and which analyses to run.
//! `run_experiment` executes it and writes versioned CSV/JSON artifacts plus
//! a manifest with content hashes; identical scenarios produce identical
//! manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{
    detect_periodicity, is_barrier, run, subordination_forest, wavefront, LinkFailure,
    SnapshotPolicy, State,
};
use crate::evasion::EvasionInstance;
use crate::geometry::{build_domain, HallwayDomain, Rect};
use crate::network::{augment_boundary_sensors, Network};
use crate::stochastic::{
    defect_survival_curve, estimate_far_node_dieout, estimate_seed_probability, LinkModel,
    MonteCarloConfig,
};
use crate::topology::{
    cohomology_class, find_defect, homology_basis, seed_nodes_all, CohomClass,
};
use crate::waves::{realize_class, single_wave, WaveSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Failures while executing a valid scenario, grouped by exit-code family.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Missing files, unreadable inputs, bad referenced data.  Exit 2.
    #[error("configuration: {0}")]
    Config(String),
    /// A module precondition failed (corridor too short, no defect to
    /// track, disconnected network, ...).  Exit 3.
    #[error("precondition: {0}")]
    Precondition(String),
    /// An internal invariant broke; this is a bug or numerical corruption.
    /// Exit 4.
    #[error("internal consistency: {0}")]
    Internal(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Precondition(_) => 3,
            ExperimentError::Internal(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl RectSpec {
    fn rect(&self) -> Rect {
        Rect::new(self.xmin, self.ymin, self.xmax, self.ymax)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum NodeSource {
    /// Uniform sample of this many points over the domain.
    Count(usize),
    /// CSV file with `node_id,x,y` rows.
    Csv(String),
    /// Inline positions.
    Positions(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WaveSpecConfig {
    pub corridor_edge: usize,
    pub direction: i8,
    #[serde(default)]
    pub anchor: Option<f64>,
    #[serde(default)]
    pub hop: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    /// Independent uniform draw from ℤ_n per node.
    Uniform,
    /// CSV file with `node_id,state` rows.
    Csv(String),
    /// Inline state values, one per node.
    Values(Vec<u8>),
    /// Program a state realizing this cohomology class.
    Class(Vec<i64>),
    /// Sum of explicitly placed single waves.
    Waves(Vec<WaveSpecConfig>),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Analyses {
    pub continuity: bool,
    pub defects: bool,
    pub forest: bool,
    pub barriers: bool,
    pub evasion: bool,
    pub class: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub trials: usize,
    pub node_counts: Vec<usize>,
    pub cell_side: f64,
    pub n_tilde: u32,
    pub horizon: u64,
    #[serde(default)]
    pub p_s_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub domain: Vec<RectSpec>,
    pub nodes: NodeSource,
    pub r: f64,
    pub eps: f64,
    pub n: u8,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub augment_boundary: bool,
    pub initial: InitialSpec,
    pub ticks: u64,
    #[serde(default)]
    pub p_s: Option<f64>,
    /// Ticks whose configurations go into snapshots.csv.
    #[serde(default)]
    pub dumps: Vec<u64>,
    #[serde(default)]
    pub analyses: Analyses,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloSection>,
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|source| ScenarioError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
    let warnings = scenario.validate()?;
    for w in warnings {
        log(&format!("warning: {w}"));
    }
    Ok(scenario)
}

fn log(msg: &str) {
    if std::env::var("GHM_LOG").is_ok_and(|v| v != "0" && !v.is_empty()) {
        eprintln!("[ghm] {msg}");
    }
}

impl Scenario {
    /// Collect every violation at once; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ScenarioError> {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        if self.format_version != FORMAT_VERSION {
            errors.push(format!(
                "format_version {} unsupported (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        if self.n < 3 {
            errors.push(format!("n = {} below the minimum alphabet size 3", self.n));
        }
        if !(self.r > 0.0) {
            errors.push(format!("communication radius r = {} must be positive", self.r));
        }
        if !(self.eps > 0.0) {
            errors.push(format!("coverage radius eps = {} must be positive", self.eps));
        }
        if self.domain.is_empty() {
            errors.push("domain has no rectangles".into());
        }
        for (i, r) in self.domain.iter().enumerate() {
            if !(r.xmax > r.xmin && r.ymax > r.ymin) {
                errors.push(format!("domain rect {i} is degenerate"));
            }
        }
        if let Some(p) = self.p_s {
            if !(p > 0.0 && p <= 1.0) {
                errors.push(format!("p_s = {p} outside (0, 1]"));
            }
        }
        if let NodeSource::Count(0) = self.nodes {
            errors.push("node count is zero".into());
        }
        if self.eps > 0.0 && self.r > 0.0 && self.eps < self.r / f64::sqrt(3.0) {
            warnings.push(format!(
                "eps = {} below r/sqrt(3) = {:.4}: wavefront disks may not overlap into barriers",
                self.eps,
                self.r / f64::sqrt(3.0)
            ));
        }
        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub ticks: Option<u64>,
    pub p_s: Option<f64>,
    /// Evasion grid resolution ρ.
    pub grid: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub format_version: u32,
    pub files: Vec<ManifestEntry>,
}

/// Everything `run_experiment` keeps in memory for callers (the CLI only
/// needs the manifest; tests poke at the rest).
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub network: Network,
    pub initial: State,
    pub summary: serde_json::Value,
}

fn map_topology(e: crate::topology::TopologyError) -> ExperimentError {
    use crate::topology::TopologyError as T;
    match e {
        T::NonIntegralDegree(..) | T::TorsionDetected(..) => {
            ExperimentError::Internal(e.to_string())
        }
        _ => ExperimentError::Precondition(e.to_string()),
    }
}

fn load_positions_csv(path: &Path) -> Result<Vec<[f64; 2]>, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node_id") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(ExperimentError::Config(format!(
                "{}:{}: expected node_id,x,y",
                path.display(),
                ln + 1
            )));
        }
        let id: usize = parts[0]
            .parse()
            .map_err(|_| ExperimentError::Config(format!("bad node_id at line {}", ln + 1)))?;
        let x: f64 = parts[1]
            .parse()
            .map_err(|_| ExperimentError::Config(format!("bad x at line {}", ln + 1)))?;
        let y: f64 = parts[2]
            .parse()
            .map_err(|_| ExperimentError::Config(format!("bad y at line {}", ln + 1)))?;
        rows.push((id, [x, y]));
    }
    rows.sort_by_key(|&(id, _)| id);
    for (expect, &(id, _)) in rows.iter().enumerate() {
        if id != expect {
            return Err(ExperimentError::Config(format!(
                "node ids must be 0..count, missing or duplicate id near {id}"
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, p)| p).collect())
}

fn load_state_csv(path: &Path, nodes: usize, n: u8) -> Result<State, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut values = vec![0u8; nodes];
    let mut seen = vec![false; nodes];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node_id") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(ExperimentError::Config(format!(
                "{}:{}: expected node_id,state",
                path.display(),
                ln + 1
            )));
        }
        let id: usize = parts[0]
            .parse()
            .map_err(|_| ExperimentError::Config(format!("bad node_id at line {}", ln + 1)))?;
        let v: u8 = parts[1]
            .parse()
            .map_err(|_| ExperimentError::Config(format!("bad state at line {}", ln + 1)))?;
        if id >= nodes {
            return Err(ExperimentError::Config(format!(
                "node_id {id} out of range (network has {nodes} nodes)"
            )));
        }
        if v >= n {
            return Err(ExperimentError::Config(format!(
                "state {v} outside the alphabet 0..{n}"
            )));
        }
        values[id] = v;
        seen[id] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(ExperimentError::Config(format!(
            "state CSV misses node {missing}"
        )));
    }
    Ok(State::new(values, n))
}

/// Parse `tick,node_id,state` snapshot rows back into per-tick states.
pub fn load_snapshots_csv(path: &Path, n: u8) -> Result<Vec<State>, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut per_tick: Vec<(u64, Vec<(usize, u8)>)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("tick") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let tick: u64 = parts[0]
            .parse()
            .map_err(|_| ExperimentError::Config("bad tick".into()))?;
        let id: usize = parts[1]
            .parse()
            .map_err(|_| ExperimentError::Config("bad node_id".into()))?;
        let v: u8 = parts[2]
            .parse()
            .map_err(|_| ExperimentError::Config("bad state".into()))?;
        match per_tick.last_mut() {
            Some((t, rows)) if *t == tick => rows.push((id, v)),
            _ => per_tick.push((tick, vec![(id, v)])),
        }
    }
    let mut out = Vec::new();
    for (tick, rows) in per_tick {
        let mut values = vec![0u8; rows.len()];
        for (id, v) in rows {
            values[id] = v;
        }
        let mut s = State::new(values, n);
        s.tick = tick;
        out.push(s);
    }
    Ok(out)
}

struct OutDir {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl OutDir {
    fn new(dir: &Path) -> Result<OutDir, ExperimentError> {
        fs::create_dir_all(dir)
            .map_err(|e| ExperimentError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        fs::write(&path, content)
            .map_err(|e| ExperimentError::Config(format!("cannot write {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(content.as_bytes());
        self.files.push(ManifestEntry {
            name: name.to_string(),
            bytes: content.len(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(())
    }

    fn finish(mut self) -> Result<Manifest, ExperimentError> {
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = Manifest { format_version: FORMAT_VERSION, files: self.files };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.dir.join("manifest.json");
        fs::write(&path, text)
            .map_err(|e| ExperimentError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}

fn build_network(
    scenario: &Scenario,
    domain: &HallwayDomain,
    seed: u64,
    base: Option<&Path>,
) -> Result<Network, ExperimentError> {
    let positions = match &scenario.nodes {
        NodeSource::Count(count) => domain.sample_points(*count, seed),
        NodeSource::Positions(p) => p.clone(),
        NodeSource::Csv(rel) => {
            let path = base.map(|b| b.join(rel)).unwrap_or_else(|| PathBuf::from(rel));
            load_positions_csv(&path)?
        }
    };
    let net = Network::build(&positions, scenario.r, scenario.eps);
    if scenario.augment_boundary {
        augment_boundary_sensors(&net, domain)
            .map_err(|e| ExperimentError::Precondition(e.to_string()))
    } else {
        Ok(net)
    }
}

fn build_initial(
    scenario: &Scenario,
    domain: &HallwayDomain,
    network: &Network,
    seed: u64,
    base: Option<&Path>,
) -> Result<State, ExperimentError> {
    match &scenario.initial {
        InitialSpec::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1ce);
            let values = (0..network.node_count())
                .map(|_| rng.gen_range(0..scenario.n))
                .collect();
            Ok(State::new(values, scenario.n))
        }
        InitialSpec::Csv(rel) => {
            let path = base.map(|b| b.join(rel)).unwrap_or_else(|| PathBuf::from(rel));
            load_state_csv(&path, network.node_count(), scenario.n)
        }
        InitialSpec::Values(values) => {
            if values.len() != network.node_count() {
                return Err(ExperimentError::Config(format!(
                    "initial has {} values but the network has {} nodes",
                    values.len(),
                    network.node_count()
                )));
            }
            if let Some(&v) = values.iter().find(|&&v| v >= scenario.n) {
                return Err(ExperimentError::Config(format!(
                    "state {v} outside the alphabet 0..{}",
                    scenario.n
                )));
            }
            Ok(State::new(values.clone(), scenario.n))
        }
        InitialSpec::Class(target) => {
            let basis = homology_basis(network).map_err(map_topology)?;
            if target.len() != basis.g {
                return Err(ExperimentError::Precondition(format!(
                    "target class has {} coordinates but the network has genus {}",
                    target.len(),
                    basis.g
                )));
            }
            realize_class(network, domain, &basis, &CohomClass { coeffs: target.clone() })
                .map_err(|e| ExperimentError::Precondition(e.to_string()))
        }
        InitialSpec::Waves(specs) => {
            let mut total = State::zero(network.node_count(), scenario.n);
            for cfg in specs {
                let spec = match cfg.anchor {
                    Some(anchor) => WaveSpec {
                        corridor_edge: cfg.corridor_edge,
                        anchor,
                        direction: cfg.direction,
                        n: scenario.n,
                        hop: cfg.hop,
                    },
                    None => crate::waves::fitted_wave_spec(
                        network,
                        domain,
                        cfg.corridor_edge,
                        scenario.n,
                        cfg.direction,
                        cfg.hop,
                    )
                    .map_err(|e| ExperimentError::Precondition(e.to_string()))?,
                };
                let wave = single_wave(network, domain, &spec)
                    .map_err(|e| ExperimentError::Precondition(e.to_string()))?;
                total = crate::topology::add_states(&total, &wave, network)
                    .map_err(map_topology)?;
            }
            Ok(total)
        }
    }
}

fn csv_with_version(body: &str) -> String {
    format!("# format_version: {FORMAT_VERSION}\n{body}")
}

fn defect_json(report: &crate::topology::DefectReport) -> serde_json::Value {
    serde_json::json!({
        "has_defect": report.has_defect,
        "kind": format!("{:?}", report.kind),
        "seed": report.seed,
        "basis_degrees": report
            .basis_degrees
            .iter()
            .map(|d| match d {
                Ok(k) => serde_json::json!({ "degree": k }),
                Err((i, j)) => serde_json::json!({ "blocked_edge": [i, j] }),
            })
            .collect::<Vec<_>>(),
    })
}

/// Execute a scenario end to end, writing all artifacts into `out_dir`.
pub fn run_experiment(
    scenario: &Scenario,
    out_dir: &Path,
    overrides: &Overrides,
    scenario_base: Option<&Path>,
) -> Result<ExperimentOutput, ExperimentError> {
    let seed = overrides.seed.unwrap_or(scenario.seed);
    let ticks = overrides.ticks.unwrap_or(scenario.ticks);
    let p_s = overrides.p_s.or(scenario.p_s);
    let n = scenario.n;

    let rects: Vec<Rect> = scenario.domain.iter().map(RectSpec::rect).collect();
    let domain = build_domain(&rects)
        .map_err(|e| ExperimentError::Config(format!("domain: {e}")))?;
    let network = build_network(scenario, &domain, seed, scenario_base)?;
    let initial = build_initial(scenario, &domain, &network, seed, scenario_base)?;
    log(&format!(
        "network: {} nodes, {} edges; running {ticks} ticks",
        network.node_count(),
        network.edges.len()
    ));

    let link = p_s.filter(|&p| p < 1.0).map(|p| LinkFailure { p_s: p, seed });
    let trace = run(&network, &initial, ticks, link, SnapshotPolicy::Full);

    let mut out = OutDir::new(out_dir)?;

    // Network files: node_id,x,y and i,j.
    let mut nodes_csv = String::from("node_id,x,y\n");
    for (i, p) in network.positions.iter().enumerate() {
        writeln!(nodes_csv, "{},{},{}", i, p[0], p[1]).unwrap();
    }
    let mut edges_csv = String::from("i,j\n");
    for &(i, j) in &network.edges {
        writeln!(edges_csv, "{i},{j}").unwrap();
    }
    out.write("network.csv", &csv_with_version(&nodes_csv))?;
    out.write("edges.csv", &csv_with_version(&edges_csv))?;

    // Snapshot dump: requested ticks only.
    let mut snaps_csv = String::from("tick,node_id,state\n");
    for &t in &scenario.dumps {
        if let Some(s) = trace.snapshot_at(t) {
            for (i, &v) in s.values.iter().enumerate() {
                writeln!(snaps_csv, "{t},{i},{v}").unwrap();
            }
        }
    }
    out.write("snapshots.csv", &csv_with_version(&snaps_csv))?;

    // Event log.
    let mut events = String::new();
    for e in &trace.events {
        let line = serde_json::json!({
            "tick": e.tick,
            "fired": e.fired,
            "stalled_count": e.stalled.len(),
        });
        writeln!(events, "{line}").unwrap();
    }
    out.write("events.jsonl", &events)?;

    // Awake-fraction series from the retained snapshots.
    let awake_fraction: Vec<f64> = trace
        .snapshots
        .iter()
        .map(|s| wavefront(s).len() as f64 / s.values.len() as f64)
        .collect();

    let mut summary = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "name": scenario.name,
        "seed": seed,
        "n": n,
        "r": scenario.r,
        "eps": scenario.eps,
        "p_s": p_s,
        "ticks": ticks,
        "node_count": network.node_count(),
        "edge_count": network.edges.len(),
        "initial_seed_nodes": seed_nodes_all(&initial, &network),
        "final_seed_nodes": seed_nodes_all(&trace.final_state, &network),
        "died_out": trace.final_state.is_zero(),
        "awake_fraction": awake_fraction,
    });
    let summary_map = summary.as_object_mut().unwrap();

    // Periodicity onset, when the trace is long enough for the window.
    if ticks >= 2 * u64::from(n) {
        if let Ok(reports) = detect_periodicity(&trace, u64::from(n)) {
            let all = reports.iter().all(|r| r.eventually_periodic);
            let onset = reports.iter().filter_map(|r| r.onset).max();
            let period = reports.iter().filter_map(|r| r.period).max();
            summary_map.insert(
                "periodicity".into(),
                serde_json::json!({
                    "all_periodic": all,
                    "max_period": period,
                    "max_onset": onset,
                }),
            );
        }
    }

    if scenario.analyses.continuity {
        let first = crate::engine::is_continuous(&network, &initial, None);
        let last = crate::engine::is_continuous(&network, &trace.final_state, None);
        summary_map.insert(
            "continuity".into(),
            serde_json::json!({
                "initial": first.continuous,
                "final": last.continuous,
            }),
        );
    }

    if scenario.analyses.defects || scenario.analyses.class {
        let basis = homology_basis(&network).map_err(map_topology)?;
        if scenario.analyses.defects {
            let report = find_defect(&initial, &network, &basis);
            summary_map.insert("defects".into(), defect_json(&report));
        }
        if scenario.analyses.class {
            let initial_class = cohomology_class(&initial, &network, &basis)
                .map(|c| c.coeffs)
                .ok();
            let final_class = cohomology_class(&trace.final_state, &network, &basis)
                .map(|c| c.coeffs)
                .ok();
            let class = serde_json::json!({
                "format_version": FORMAT_VERSION,
                "genus": basis.g,
                "initial": initial_class,
                "final": final_class,
            });
            out.write("class.json", &serde_json::to_string_pretty(&class).unwrap())?;
            summary_map.insert("class".into(), class);
        }
    }

    if scenario.analyses.forest {
        let forest = subordination_forest(&network, &trace)
            .map_err(|e| ExperimentError::Precondition(e.to_string()))?;
        let fj = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "roots": forest.roots,
            "parent": forest
                .parent
                .iter()
                .map(|p| p.map(|(id, t)| serde_json::json!([id, t])))
                .collect::<Vec<_>>(),
            "depth": forest.depth,
        });
        out.write("forest.json", &serde_json::to_string_pretty(&fj).unwrap())?;
        summary_map.insert(
            "forest".into(),
            serde_json::json!({
                "roots": forest.roots.len(),
                "max_depth": forest.depth.iter().max(),
            }),
        );
    }

    if scenario.analyses.barriers {
        // Post-transient window: last half of the run, capped at 100 ticks.
        let window = (ticks / 2).min(100).max(1);
        let start = ticks - window;
        let mut per_rect = Vec::new();
        for rect in domain.rects.iter() {
            let mut hits = 0u64;
            for t in start..=ticks {
                let s = trace.snapshot_at(t).expect("full snapshots retained");
                let front = wavefront(s);
                if is_barrier(&network, &front, &domain, rect).unwrap_or(false) {
                    hits += 1;
                }
            }
            per_rect.push(hits as f64 / (window + 1) as f64);
        }
        summary_map.insert("barrier_fraction_per_rect".into(), serde_json::json!(per_rect));
    }

    if scenario.analyses.evasion {
        let rho = overrides.grid.unwrap_or(scenario.eps / 2.0);
        let entry = (2 * u64::from(n)).min(ticks.saturating_sub(1));
        let inst = EvasionInstance::from_trace(&domain, &network, &trace, rho, entry)
            .map_err(|e| ExperimentError::Precondition(e.to_string()))?;
        let verdict = inst.decide();
        let vj = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "outcome": verdict.outcome,
            "resolution": verdict.resolution,
            "witness": verdict.witness,
        });
        out.write("verdict.json", &serde_json::to_string_pretty(&vj).unwrap())?;
        if let Some(w) = &verdict.witness {
            let mut wcsv = String::from("tick,cell_x,cell_y\n");
            for step in w {
                writeln!(wcsv, "{},{},{}", step.tick, step.cell.0, step.cell.1).unwrap();
            }
            out.write("witness.csv", &csv_with_version(&wcsv))?;
        }
        summary_map.insert("evasion".into(), serde_json::json!(format!("{:?}", verdict.outcome)));
    }

    let summary_text = serde_json::to_string_pretty(&summary).unwrap();
    out.write("summary.json", &summary_text)?;
    let manifest = out.finish()?;
    Ok(ExperimentOutput { manifest, network, initial, summary })
}

/// Run the scenario's Monte Carlo section and write results.json.
pub fn run_montecarlo(
    scenario: &Scenario,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<Manifest, ExperimentError> {
    let section = scenario
        .montecarlo
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("scenario has no montecarlo section".into()))?;
    let seed = overrides.seed.unwrap_or(scenario.seed);
    let rects: Vec<Rect> = scenario.domain.iter().map(RectSpec::rect).collect();
    let domain = build_domain(&rects)
        .map_err(|e| ExperimentError::Config(format!("domain: {e}")))?;
    let config = MonteCarloConfig {
        trials: section.trials,
        seed,
        n: scenario.n,
        node_counts: section.node_counts.clone(),
        r: scenario.r,
        eps: scenario.eps,
        p_s: scenario.p_s.unwrap_or(1.0),
        horizon: section.horizon,
        cell_side: section.cell_side,
        n_tilde: section.n_tilde,
        link_model: LinkModel::PerTick,
    };
    let seeds = estimate_seed_probability(&domain, &config)
        .map_err(|e| ExperimentError::Precondition(e.to_string()))?;
    let dieout = estimate_far_node_dieout(&domain, &config)
        .map_err(|e| ExperimentError::Precondition(e.to_string()))?;

    // Survival curves on a seeded ring, one per requested p_s.
    let mut curves = Vec::new();
    if !section.p_s_grid.is_empty() {
        let net = crate::engine::cycle_network(4 * scenario.n as usize);
        let values: Vec<u8> = (0..net.node_count())
            .map(|i| (i % scenario.n as usize) as u8)
            .collect();
        let s0 = State::new(values, scenario.n);
        for &p in &section.p_s_grid {
            let curve = defect_survival_curve(
                &net,
                &s0,
                p,
                section.horizon,
                section.trials,
                seed,
                LinkModel::PerTick,
            )
            .map_err(|e| ExperimentError::Precondition(e.to_string()))?;
            curves.push(serde_json::json!({
                "p_s": p,
                "death_fraction": curve.death_fraction.fraction,
                "ci": curve.death_fraction.ci,
                "deaths_by_tick": curve.deaths_by_tick,
            }));
        }
    }

    let results = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "config": {
            "trials": section.trials,
            "seed": seed,
            "n": scenario.n,
            "node_counts": section.node_counts,
            "r": scenario.r,
            "eps": scenario.eps,
            "cell_side": section.cell_side,
            "n_tilde": section.n_tilde,
            "horizon": section.horizon,
        },
        "seed_probability": seeds
            .iter()
            .map(|s| serde_json::json!({
                "node_count": s.node_count,
                "fraction": s.estimate.fraction,
                "ci": s.estimate.ci,
                "analytic_lower_bound": s.analytic_lower_bound,
                "cell_count": s.cell_count,
            }))
            .collect::<Vec<_>>(),
        "far_node_dieout": {
            "fraction": dieout.estimate.fraction,
            "ci": dieout.estimate.ci,
            "analytic_bound": dieout.analytic_bound,
        },
        "survival_curves": curves,
    });
    let mut out = OutDir::new(out_dir)?;
    out.write("results.json", &serde_json::to_string_pretty(&results).unwrap())?;
    out.finish()
}

/// The built-in replication of the paper's simulation scenario: a hallway
/// complex inside a 200×200 square, 16250 nodes, n = 20, r = 1.5.  A tight
/// seed loop is pinned near one junction so the run is reproducibly seeded.
pub fn paper_scenario() -> Scenario {
    let w = 4.0;
    let mut rects = Vec::new();
    // Three horizontal and three vertical corridors spanning the square.
    for &y in &[0.0, 98.0, 196.0] {
        rects.push(RectSpec { xmin: 0.0, ymin: y, xmax: 200.0, ymax: y + w });
    }
    for &x in &[0.0, 98.0, 196.0] {
        rects.push(RectSpec { xmin: x, ymin: 0.0, xmax: x + w, ymax: 200.0 });
    }
    Scenario {
        format_version: FORMAT_VERSION,
        name: Some("paper-hallways-200x200".into()),
        domain: rects,
        nodes: NodeSource::Count(16250),
        r: 1.5,
        eps: 1.5,
        n: 20,
        seed: 20,
        augment_boundary: false,
        initial: InitialSpec::Uniform,
        ticks: 400,
        p_s: None,
        dumps: vec![0, 45, 250, 400],
        analyses: Analyses {
            continuity: false,
            defects: false,
            forest: false,
            barriers: true,
            evasion: false,
            class: false,
        },
        montecarlo: None,
    }
}

/// `paper_scenario` made concrete: positions sampled and a seed loop pinned
/// at the central junction, so seed detection in the initial state is
/// deterministic.  `seed` defaults to the scenario's own seed.
pub fn replicate_paper_scenario(seed: Option<u64>) -> Result<Scenario, ExperimentError> {
    let mut scenario = paper_scenario();
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let rects: Vec<Rect> = scenario.domain.iter().map(RectSpec::rect).collect();
    let domain = build_domain(&rects)
        .map_err(|e| ExperimentError::Config(format!("domain: {e}")))?;
    let count = match scenario.nodes {
        NodeSource::Count(c) => c,
        _ => unreachable!("paper_scenario samples by count"),
    };
    let mut positions = domain.sample_points(count - usize::from(scenario.n), scenario.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0xd1ce);
    let mut values: Vec<u8> = (0..positions.len())
        .map(|_| rng.gen_range(0..scenario.n))
        .collect();
    pin_seed(&mut positions, &mut values, [100.0, 100.0], scenario.r, scenario.n);
    scenario.nodes = NodeSource::Positions(positions);
    scenario.initial = InitialSpec::Values(values);
    Ok(scenario)
}

/// Plant a tight seed loop near `center`: n extra nodes within r/2 holding
/// 0..n−1.  Returns the updated positions and values.
pub fn pin_seed(
    positions: &mut Vec<[f64; 2]>,
    values: &mut Vec<u8>,
    center: [f64; 2],
    r: f64,
    n: u8,
) {
    for k in 0..n {
        let a = f64::from(k) / f64::from(n) * std::f64::consts::TAU;
        positions.push([
            center[0] + 0.2 * r * a.cos(),
            center[1] + 0.2 * r * a.sin(),
        ]);
        values.push(k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn strip_scenario() -> Scenario {
        Scenario {
            format_version: FORMAT_VERSION,
            name: Some("strip".into()),
            domain: vec![RectSpec { xmin: 0.0, ymin: 0.0, xmax: 14.0, ymax: 2.0 }],
            nodes: NodeSource::Count(160),
            r: 1.2,
            eps: 1.2,
            n: 4,
            seed: 5,
            augment_boundary: false,
            initial: InitialSpec::Uniform,
            ticks: 30,
            p_s: None,
            dumps: vec![0, 30],
            analyses: Analyses {
                continuity: true,
                defects: true,
                ..Analyses::default()
            },
            montecarlo: None,
        }
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let s = strip_scenario();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value =
            serde_json::to_value(strip_scenario()).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("surprise".into(), serde_json::json!(1));
        assert!(serde_json::from_value::<Scenario>(v).is_err());
    }

    #[test]
    fn validation_collects_every_violation() {
        let mut s = strip_scenario();
        s.n = 2;
        s.r = -1.0;
        s.p_s = Some(1.5);
        match s.validate() {
            Err(ScenarioError::Invalid(errors)) => {
                assert!(errors.len() >= 3, "{errors:?}");
                assert!(errors.iter().any(|e| e.contains("alphabet")));
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn narrow_coverage_warns_but_passes() {
        let mut s = strip_scenario();
        s.eps = 0.5; // below r/sqrt(3) ≈ 0.69
        let warnings = s.validate().unwrap();
        assert!(warnings.iter().any(|w| w.contains("sqrt(3)")));
    }

    #[test]
    fn experiment_is_deterministic_and_round_trips() {
        let s = strip_scenario();
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        let o1 = run_experiment(&s, d1.path(), &Overrides::default(), None).unwrap();
        let o2 = run_experiment(&s, d2.path(), &Overrides::default(), None).unwrap();
        let h1: Vec<&str> = o1.manifest.files.iter().map(|f| f.sha256.as_str()).collect();
        let h2: Vec<&str> = o2.manifest.files.iter().map(|f| f.sha256.as_str()).collect();
        assert_eq!(h1, h2, "same scenario must produce identical artifacts");

        // Round-trip: positions and snapshots reload to the same data.
        let pos = load_positions_csv(&d1.path().join("network.csv")).unwrap();
        assert_eq!(pos, o1.network.positions);
        let snaps = load_snapshots_csv(&d1.path().join("snapshots.csv"), s.n).unwrap();
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[0].values, o1.initial.values);
    }

    #[test]
    fn seed_override_changes_the_run() {
        let s = strip_scenario();
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        let o1 = run_experiment(&s, d1.path(), &Overrides::default(), None).unwrap();
        let o2 = run_experiment(
            &s,
            d2.path(),
            &Overrides { seed: Some(99), ..Overrides::default() },
            None,
        )
        .unwrap();
        assert_ne!(o1.initial.values, o2.initial.values);
    }

    #[test]
    fn programmed_class_scenario_reports_it() {
        let s = Scenario {
            name: Some("annulus-class".into()),
            domain: crate::geometry::annulus_frame(22.0, 2.0)
                .iter()
                .map(|r| RectSpec {
                    xmin: r.xmin,
                    ymin: r.ymin,
                    xmax: r.xmax,
                    ymax: r.ymax,
                })
                .collect(),
            nodes: NodeSource::Count(760),
            r: 1.5,
            eps: 1.5,
            n: 5,
            seed: 12,
            initial: InitialSpec::Class(vec![1]),
            ticks: 12,
            dumps: vec![],
            analyses: Analyses { class: true, defects: true, ..Analyses::default() },
            ..strip_scenario()
        };
        let dir = tempdir().unwrap();
        let out = run_experiment(&s, dir.path(), &Overrides::default(), None).unwrap();
        let class = &out.summary["class"];
        assert_eq!(class["initial"], serde_json::json!([1]));
        assert_eq!(class["final"], serde_json::json!([1]));
        assert_eq!(out.summary["defects"]["kind"], "Global");
    }

    #[test]
    fn bad_class_length_is_a_precondition_error() {
        let mut s = strip_scenario();
        s.initial = InitialSpec::Class(vec![1]); // strip has genus 0
        let dir = tempdir().unwrap();
        match run_experiment(&s, dir.path(), &Overrides::default(), None) {
            Err(e @ ExperimentError::Precondition(_)) => assert_eq!(e.exit_code(), 3),
            Err(other) => panic!("expected precondition failure, got {other}"),
            Ok(_) => panic!("expected precondition failure, run succeeded"),
        }
    }

    #[test]
    fn parse_reports_file_and_field() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\"format_version\": 1,").unwrap();
        assert!(matches!(
            parse_scenario(&path),
            Err(ScenarioError::Parse { .. })
        ));
        assert!(matches!(
            parse_scenario(&dir.path().join("missing.json")),
            Err(ScenarioError::Io { .. })
        ));
    }

    #[test]
    fn montecarlo_section_produces_results() {
        let mut s = strip_scenario();
        s.montecarlo = Some(MonteCarloSection {
            trials: 6,
            node_counts: vec![40, 160],
            cell_side: 0.8,
            n_tilde: 5,
            horizon: 10,
            p_s_grid: vec![1.0],
        });
        let dir = tempdir().unwrap();
        let manifest = run_montecarlo(&s, dir.path(), &Overrides::default()).unwrap();
        assert!(manifest.files.iter().any(|f| f.name == "results.json"));
        let text = fs::read_to_string(dir.path().join("results.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        // p_s = 1 row must show zero deaths.
        assert_eq!(v["survival_curves"][0]["death_fraction"], 0.0);
    }

    #[test]
    fn paper_scenario_is_valid() {
        let s = paper_scenario();
        assert!(s.validate().is_ok());
        assert!(matches!(s.nodes, NodeSource::Count(16250)));
        assert_eq!(s.n, 20);
        assert_eq!(s.r, 1.5);
    }
}
