//! Integer 1-chains and H1 of the Rips 2-skeleton: winding degrees, seed
//! and defect detection, null-homology tests, and the cohomologizing map.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{cyclic_diff, is_continuous, State};
use crate::network::Network;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("state is discontinuous on cycle edge ({0}, {1})")]
    DiscontinuousOnCycle(usize, usize),
    #[error("degree sum {0} is not divisible by n = {1}")]
    NonIntegralDegree(i64, u8),
    #[error("network is not connected")]
    DisconnectedNetwork,
    #[error("torsion detected in H1 (elementary divisor {0})")]
    TorsionDetected(i64),
    #[error("chain is not a cycle (boundary does not vanish)")]
    NotACycle,
    #[error("chain uses edge ({0}, {1}) which is not in the network")]
    EdgeNotInNetwork(usize, usize),
    #[error("state is discontinuous on edge ({0}, {1})")]
    DiscontinuousState(usize, usize),
    #[error("supports touch: node {0} neighbors or equals node {1}")]
    OverlappingSupports(usize, usize),
}

/// An integer 1-chain. Keys are canonical edges (i, j) with i < j; the
/// coefficient counts the oriented edge i -> j, so flipping orientation
/// negates it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chain1 {
    pub terms: BTreeMap<(usize, usize), i64>,
}

impl Chain1 {
    pub fn new() -> Chain1 {
        Chain1::default()
    }

    /// Add `coeff` copies of the oriented edge a -> b.
    pub fn add_edge(&mut self, a: usize, b: usize, coeff: i64) {
        assert_ne!(a, b);
        let (key, c) = if a < b { ((a, b), coeff) } else { ((b, a), -coeff) };
        let entry = self.terms.entry(key).or_insert(0);
        *entry += c;
        if *entry == 0 {
            self.terms.remove(&key);
        }
    }

    /// Closed edge walk v0 -> v1 -> ... -> v0 as a chain.
    pub fn from_vertex_loop(vertices: &[usize]) -> Chain1 {
        let mut c = Chain1::new();
        for w in 0..vertices.len() {
            c.add_edge(vertices[w], vertices[(w + 1) % vertices.len()], 1);
        }
        c
    }

    pub fn add(&self, other: &Chain1) -> Chain1 {
        let mut out = self.clone();
        for (&(a, b), &c) in &other.terms {
            out.add_edge(a, b, c);
        }
        out
    }

    pub fn neg(&self) -> Chain1 {
        Chain1 { terms: self.terms.iter().map(|(&e, &c)| (e, -c)).collect() }
    }

    pub fn scale(&self, k: i64) -> Chain1 {
        if k == 0 {
            return Chain1::new();
        }
        Chain1 { terms: self.terms.iter().map(|(&e, &c)| (e, c * k)).collect() }
    }

    /// Does the 0-chain boundary vanish?
    pub fn is_cycle(&self) -> bool {
        let mut bnd: BTreeMap<usize, i64> = BTreeMap::new();
        for (&(a, b), &c) in &self.terms {
            *bnd.entry(b).or_insert(0) += c;
            *bnd.entry(a).or_insert(0) -= c;
        }
        bnd.values().all(|&v| v == 0)
    }

    /// A loop: a single closed vertex sequence with coefficients +-1.
    pub fn is_loop(&self) -> bool {
        if self.terms.is_empty() || !self.terms.values().all(|&c| c.abs() == 1) {
            return false;
        }
        if !self.is_cycle() {
            return false;
        }
        // Each vertex must meet exactly two chain edges, and the edge set
        // must be connected.
        let mut deg: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in self.terms.keys() {
            *deg.entry(a).or_insert(0) += 1;
            *deg.entry(b).or_insert(0) += 1;
        }
        if !deg.values().all(|&d| d == 2) {
            return false;
        }
        let start = *deg.keys().next().unwrap();
        let mut seen = std::collections::HashSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(a, b) in self.terms.keys() {
                let w = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == deg.len()
    }
}

/// Winding degree of a continuous state along a cycle: (1/n) of the summed
/// balanced differences.
pub fn degree(network: &Network, state: &State, cycle: &Chain1) -> Result<i64, TopologyError> {
    let n = state.n;
    let mut total = 0i64;
    for (&(i, j), &c) in &cycle.terms {
        if network.edge_id(i, j).is_none() {
            return Err(TopologyError::EdgeNotInNetwork(i, j));
        }
        let d = cyclic_diff(state.values[i], state.values[j], n);
        if d.abs() > 1 {
            return Err(TopologyError::DiscontinuousOnCycle(i, j));
        }
        total += c * d;
    }
    if total.rem_euclid(i64::from(n)) != 0 {
        // Internal consistency failure: forced summands always cancel mod n
        // on a cycle, so this is a bug sentinel rather than a user error.
        return Err(TopologyError::NonIntegralDegree(total, n));
    }
    Ok(total / i64::from(n))
}

/// Find one seed loop: a directed cycle of the successor digraph
/// (arcs x -> y whenever u(y) = u(x) + 1 mod n). Deterministic DFS in
/// ascending node and neighbor order.
pub fn find_seed(state: &State, network: &Network) -> Option<Vec<usize>> {
    let nodes = network.node_count();
    let succ = |x: usize| {
        network.adjacency[x]
            .iter()
            .map(|&(y, _)| y)
            .filter(move |&y| state.values[y] == (state.values[x] + 1) % state.n)
    };
    // 0 = white, 1 = on stack, 2 = done
    let mut color = vec![0u8; nodes];
    for start in 0..nodes {
        if color[start] != 0 {
            continue;
        }
        let mut path: Vec<usize> = vec![start];
        let mut iters = vec![succ(start)];
        color[start] = 1;
        while let Some(it) = iters.last_mut() {
            match it.next() {
                Some(y) if color[y] == 0 => {
                    color[y] = 1;
                    path.push(y);
                    iters.push(succ(y));
                }
                Some(y) if color[y] == 1 => {
                    let pos = path.iter().position(|&v| v == y).unwrap();
                    return Some(path[pos..].to_vec());
                }
                Some(_) => {}
                None => {
                    let v = path.pop().unwrap();
                    color[v] = 2;
                    iters.pop();
                }
            }
        }
    }
    None
}

/// All nodes lying on some seed loop: vertices of non-trivial strongly
/// connected components of the successor digraph.
pub fn seed_nodes_all(state: &State, network: &Network) -> Vec<usize> {
    let nodes = network.node_count();
    let succs: Vec<Vec<usize>> = (0..nodes)
        .map(|x| {
            network.adjacency[x]
                .iter()
                .map(|&(y, _)| y)
                .filter(|&y| state.values[y] == (state.values[x] + 1) % state.n)
                .collect()
        })
        .collect();
    // Iterative Tarjan.
    let mut index = vec![usize::MAX; nodes];
    let mut low = vec![0usize; nodes];
    let mut on_stack = vec![false; nodes];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut out = Vec::new();
    for root in 0..nodes {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut pi)) = call.last_mut() {
            if *pi == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *pi < succs[v].len() {
                let w = succs[v][*pi];
                *pi += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    if comp.len() > 1 {
                        out.extend(comp);
                    }
                }
                call.pop();
                if let Some(&mut (parent, _)) = call.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// A sparse integer column: ascending row index -> nonzero coefficient.
type SparseCol = BTreeMap<usize, i64>;

fn col_axpy(target: &mut SparseCol, q: i64, source: &SparseCol) {
    if q == 0 {
        return;
    }
    for (&row, &v) in source {
        let entry = target.entry(row).or_insert(0);
        *entry += q * v;
        if *entry == 0 {
            target.remove(&row);
        }
    }
}

fn col_combine(a: &SparseCol, qa: i64, b: &SparseCol, qb: i64) -> SparseCol {
    let mut out = SparseCol::new();
    col_axpy(&mut out, qa, a);
    col_axpy(&mut out, qb, b);
    out
}

/// Extended gcd: returns (g, s, t) with s*a + t*b = g > 0.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        let s = a.signum();
        return (a.abs(), if s == 0 { 1 } else { s }, 0);
    }
    let (g, s, t) = ext_gcd(b, a.rem_euclid(b));
    (g, t, s - (a.div_euclid(b)) * t)
}

/// Integer column echelonization of the boundary matrix: unimodular column
/// operations only, so the column span is preserved exactly. Each reduced
/// column ends with a distinct lowest row ("low"); the map records which
/// reduced column owns each pivot row.
fn reduce_columns(columns: Vec<SparseCol>) -> (Vec<SparseCol>, BTreeMap<usize, usize>) {
    let mut reduced: Vec<SparseCol> = Vec::new();
    let mut pivot_of_row: BTreeMap<usize, usize> = BTreeMap::new();
    for mut col in columns {
        loop {
            let Some((&low, &val)) = col.last_key_value() else { break };
            match pivot_of_row.get(&low) {
                None => {
                    pivot_of_row.insert(low, reduced.len());
                    reduced.push(col);
                    break;
                }
                Some(&pc) => {
                    let d = reduced[pc][&low];
                    if val % d == 0 {
                        let q = val / d;
                        let rc = reduced[pc].clone();
                        col_axpy(&mut col, -q, &rc);
                    } else {
                        // gcd-combine the two columns (unimodular pair op)
                        // so the pivot entry becomes gcd(d, val).
                        let (g, s, t) = ext_gcd(d, val);
                        let new_pivot = col_combine(&reduced[pc], s, &col, t);
                        let new_col = col_combine(&reduced[pc], val / g, &col, -d / g);
                        reduced[pc] = new_pivot;
                        col = new_col;
                    }
                }
            }
        }
    }
    (reduced, pivot_of_row)
}

/// A computed basis of H1 with the data needed to coordinate any cycle.
#[derive(Debug, Clone)]
pub struct H1Basis {
    /// Fundamental cycles of the free non-tree edges; an exact basis.
    pub basis_cycles: Vec<Chain1>,
    /// Triangle boundaries in fundamental-cycle coordinates (one sparse
    /// column per triangle; rows index non-tree edges).
    pub boundary_columns: Vec<Vec<(usize, i64)>>,
    /// Edge ids of the BFS spanning tree.
    pub tree_edges: Vec<usize>,
    /// Edge ids of the non-tree edges, in ascending order; these index the
    /// fundamental-cycle coordinates.
    pub nontree_edges: Vec<usize>,
    pub g: usize,
    /// Column-echelon form of the boundary columns; spans im ∂₂ exactly.
    reduced: Vec<SparseCol>,
    /// Pivot row -> index into `reduced`.
    pivot_of_row: BTreeMap<usize, usize>,
    /// Non-tree coordinate rows that are not pivot rows, ascending; these
    /// carry the free part of H1.
    free_rows: Vec<usize>,
    /// Per-node BFS parent and connecting edge id.
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
    /// Non-tree coordinate index per edge id (usize::MAX for tree edges).
    nontree_index: Vec<usize>,
}

impl H1Basis {
    /// Fundamental-cycle coordinates of a cycle: its coefficients on the
    /// non-tree edges.
    fn fundamental_coords(
        &self,
        network: &Network,
        cycle: &Chain1,
    ) -> Result<SparseCol, TopologyError> {
        if !cycle.is_cycle() {
            return Err(TopologyError::NotACycle);
        }
        let mut x = SparseCol::new();
        for (&(i, j), &c) in &cycle.terms {
            let Some(e) = network.edge_id(i, j) else {
                return Err(TopologyError::EdgeNotInNetwork(i, j));
            };
            let idx = self.nontree_index[e];
            if idx != usize::MAX {
                let entry = x.entry(idx).or_insert(0);
                *entry += c;
                if *entry == 0 {
                    x.remove(&idx);
                }
            }
        }
        Ok(x)
    }

    /// Subtract reduced boundary columns, top row down, until every pivot
    /// row is clear; what survives lives on the free rows.
    fn reduce_mod_boundaries(&self, mut x: SparseCol) -> SparseCol {
        let mut cursor = usize::MAX;
        loop {
            let Some((&row, &val)) = x.range(..=cursor).next_back() else { break };
            if let Some(&pc) = self.pivot_of_row.get(&row) {
                let d = self.reduced[pc][&row];
                debug_assert_eq!(val % d, 0, "torsion-free reduction");
                let q = val / d;
                col_axpy(&mut x, -q, &self.reduced[pc]);
                cursor = row; // the subtraction touched only rows <= row
            } else {
                if row == 0 {
                    break;
                }
                cursor = row - 1;
            }
        }
        x
    }

    /// Z^g coordinates of the cycle's homology class.
    pub fn coordinates(&self, network: &Network, cycle: &Chain1) -> Result<Vec<i64>, TopologyError> {
        let x = self.fundamental_coords(network, cycle)?;
        let r = self.reduce_mod_boundaries(x);
        Ok(self
            .free_rows
            .iter()
            .map(|row| r.get(row).copied().unwrap_or(0))
            .collect())
    }

    /// Tree path from `a` up-and-over to `b` as a chain (oriented a -> b).
    fn tree_path(&self, a: usize, b: usize) -> Chain1 {
        let mut c = Chain1::new();
        let (mut x, mut y) = (a, b);
        while self.depth[x] > self.depth[y] {
            let (p, _) = self.parent[x].unwrap();
            c.add_edge(x, p, 1);
            x = p;
        }
        while self.depth[y] > self.depth[x] {
            let (p, _) = self.parent[y].unwrap();
            c.add_edge(p, y, 1);
            y = p;
        }
        while x != y {
            let (px, _) = self.parent[x].unwrap();
            let (py, _) = self.parent[y].unwrap();
            c.add_edge(x, px, 1);
            c.add_edge(py, y, 1);
            x = px;
            y = py;
        }
        c
    }
}

/// Compute an integer H1 basis of the Rips 2-skeleton.
pub fn homology_basis(network: &Network) -> Result<H1Basis, TopologyError> {
    if !network.is_connected() {
        return Err(TopologyError::DisconnectedNetwork);
    }
    let nodes = network.node_count();

    // BFS spanning tree from node 0.
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut depth = vec![usize::MAX; nodes];
    let mut queue = std::collections::VecDeque::from([0usize]);
    depth[0] = 0;
    let mut tree_edge = vec![false; network.edges.len()];
    while let Some(v) = queue.pop_front() {
        for &(w, e) in &network.adjacency[v] {
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                parent[w] = Some((v, e));
                tree_edge[e] = true;
                queue.push_back(w);
            }
        }
    }
    let tree_edges: Vec<usize> = (0..network.edges.len()).filter(|&e| tree_edge[e]).collect();
    let nontree_edges: Vec<usize> = (0..network.edges.len()).filter(|&e| !tree_edge[e]).collect();
    let mut nontree_index = vec![usize::MAX; network.edges.len()];
    for (idx, &e) in nontree_edges.iter().enumerate() {
        nontree_index[e] = idx;
    }
    let m = nontree_edges.len();

    // Triangle boundaries in fundamental-cycle coordinates.
    let mut columns: Vec<SparseCol> = Vec::with_capacity(network.triangles.len());
    let mut boundary_columns = Vec::with_capacity(network.triangles.len());
    for &(i, j, k) in &network.triangles {
        let mut col = SparseCol::new();
        for (a, bb, sign) in [(i, j, 1i64), (j, k, 1), (i, k, -1)] {
            let e = network.edge_id(a, bb).unwrap();
            let idx = nontree_index[e];
            if idx != usize::MAX {
                let entry = col.entry(idx).or_insert(0);
                *entry += sign;
                if *entry == 0 {
                    col.remove(&idx);
                }
            }
        }
        boundary_columns.push(col.iter().map(|(&r, &v)| (r, v)).collect());
        columns.push(col);
    }
    let (reduced, pivot_of_row) = reduce_columns(columns);
    for col in &reduced {
        let (_, &d) = col.last_key_value().unwrap();
        if d.abs() != 1 {
            return Err(TopologyError::TorsionDetected(d));
        }
    }
    let free_rows: Vec<usize> = (0..m).filter(|r| !pivot_of_row.contains_key(r)).collect();
    let g = free_rows.len();

    let mut basis = H1Basis {
        basis_cycles: Vec::new(),
        boundary_columns,
        tree_edges,
        nontree_edges,
        g,
        reduced,
        pivot_of_row,
        free_rows,
        parent,
        depth,
        nontree_index,
    };

    // Basis: fundamental cycle of each free non-tree edge, i.e. the edge
    // plus the tree path back between its endpoints.
    for fi in 0..g {
        let (i, j) = network.edges[basis.nontree_edges[basis.free_rows[fi]]];
        let mut c = Chain1::new();
        c.add_edge(i, j, 1);
        let cycle = c.add(&basis.tree_path(j, i));
        debug_assert!(cycle.is_cycle());
        basis.basis_cycles.push(cycle);
    }
    Ok(basis)
}

/// Is the cycle a boundary (zero in H1)?
pub fn is_null_homologous(
    network: &Network,
    cycle: &Chain1,
    basis: &H1Basis,
) -> Result<bool, TopologyError> {
    let x = basis.fundamental_coords(network, cycle)?;
    Ok(basis.reduce_mod_boundaries(x).is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    None,
    /// A seed on a null-homologous loop.
    Local,
    /// Nonzero degree on some basis class.
    Global,
}

#[derive(Debug, Clone)]
pub struct DefectReport {
    /// Degree on each basis cycle; `Err` holds the first edge on which the
    /// state is discontinuous, blocking evaluation of that cycle.
    pub basis_degrees: Vec<Result<i64, (usize, usize)>>,
    pub seed: Option<Vec<usize>>,
    pub has_defect: bool,
    pub kind: DefectKind,
}

pub fn find_defect(state: &State, network: &Network, basis: &H1Basis) -> DefectReport {
    let basis_degrees: Vec<Result<i64, (usize, usize)>> = basis
        .basis_cycles
        .iter()
        .map(|c| {
            degree(network, state, c).map_err(|e| match e {
                TopologyError::DiscontinuousOnCycle(i, j) => (i, j),
                other => panic!("unexpected degree failure: {other}"),
            })
        })
        .collect();
    let seed = find_seed(state, network);
    let global = basis_degrees.iter().any(|d| matches!(d, Ok(v) if *v != 0));
    let kind = if global {
        DefectKind::Global
    } else if let Some(loop_nodes) = &seed {
        let chain = Chain1::from_vertex_loop(loop_nodes);
        match is_null_homologous(network, &chain, basis) {
            Ok(true) => DefectKind::Local,
            // Non-null seed whose class degrees were blocked: still global.
            Ok(false) => DefectKind::Global,
            Err(_) => DefectKind::Local,
        }
    } else {
        DefectKind::None
    };
    DefectReport { basis_degrees, has_defect: seed.is_some() || global, seed, kind }
}

/// An element of H^1 = Hom(H1, Z) in basis coordinates.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CohomClass {
    pub coeffs: Vec<i64>,
}

/// The cohomologizing map h: degrees of a globally continuous state on the
/// basis cycles.
pub fn cohomology_class(
    state: &State,
    network: &Network,
    basis: &H1Basis,
) -> Result<CohomClass, TopologyError> {
    let r = is_continuous(network, state, None);
    if let Some((i, j)) = r.violating_edge {
        return Err(TopologyError::DiscontinuousState(i, j));
    }
    let coeffs = basis
        .basis_cycles
        .iter()
        .map(|c| degree(network, state, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CohomClass { coeffs })
}

/// Pointwise sum mod n of two states whose supports are separated (no edge
/// joins them, no shared node); classes add under this operation.
pub fn add_states(
    phi1: &State,
    phi2: &State,
    network: &Network,
) -> Result<State, TopologyError> {
    assert_eq!(phi1.n, phi2.n);
    let s1 = phi1.support();
    let s2: std::collections::HashSet<usize> = phi2.support().into_iter().collect();
    for &x in &s1 {
        if s2.contains(&x) {
            return Err(TopologyError::OverlappingSupports(x, x));
        }
        for y in network.neighbors(x) {
            if s2.contains(&y) {
                return Err(TopologyError::OverlappingSupports(x, y));
            }
        }
    }
    let values: Vec<u8> = phi1
        .values
        .iter()
        .zip(&phi2.values)
        .map(|(&a, &b)| (a + b) % phi1.n)
        .collect();
    let out = State { values, n: phi1.n, tick: 0 };
    Ok(out)
}

/// Basis export: each cycle as a list of `[a, b, coeff]` oriented edges,
/// classes as plain integer arrays.
pub fn basis_to_json(basis: &H1Basis) -> serde_json::Value {
    let cycles: Vec<serde_json::Value> = basis
        .basis_cycles
        .iter()
        .map(|c| {
            let edges: Vec<serde_json::Value> = c
                .terms
                .iter()
                .map(|(&(a, b), &k)| serde_json::json!([a, b, k]))
                .collect();
            serde_json::Value::Array(edges)
        })
        .collect();
    serde_json::json!({ "g": basis.g, "cycles": cycles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{cycle_network, run, step, SnapshotPolicy};
    use crate::geometry::{build_domain, figure_eight};
    use crate::network::Network;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp_state(k: usize, n: u8) -> State {
        State::new((0..k).map(|i| (i % n as usize) as u8).collect(), n)
    }

    /// Hollow square: 4 nodes, 4 edges, no triangles.
    fn hollow_square() -> Network {
        Network::from_edge_list(
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            &[(0, 1), (1, 2), (2, 3), (0, 3)],
            1.0,
            1.0,
        )
    }

    /// Dense sampled network on a figure-eight hallway; g should be 2.
    fn fig8_net() -> (Network, crate::geometry::HallwayDomain, Vec<[f64; 2]>) {
        let d = build_domain(&figure_eight(10.0, 1.6)).unwrap();
        let r = 1.5;
        let pts = d.sample_points(380, 3);
        let net = Network::build(&pts, r, r);
        (net, d, pts)
    }

    /// Wheel: hub 0 joined to a rim cycle 1..=k; fully triangulated disk.
    fn wheel(k: usize) -> Network {
        let mut pts = vec![[0.0, 0.0]];
        let mut edges = Vec::new();
        for i in 0..k {
            let a = i as f64 / k as f64 * std::f64::consts::TAU;
            pts.push([a.cos(), a.sin()]);
            edges.push((0, 1 + i));
            edges.push((1 + i, 1 + (i + 1) % k));
        }
        Network::from_edge_list(&pts, &edges, 1.0, 1.0)
    }

    #[test]
    fn degree_on_seed_loop_is_one() {
        let n = 6u8;
        let net = cycle_network(n as usize);
        let s = ramp_state(n as usize, n);
        let c = Chain1::from_vertex_loop(&(0..n as usize).collect::<Vec<_>>());
        assert!(c.is_loop());
        assert_eq!(degree(&net, &s, &c).unwrap(), 1);
        // Opposite orientation negates.
        let rev: Vec<usize> = (0..n as usize).rev().collect();
        let cr = Chain1::from_vertex_loop(&rev);
        assert_eq!(degree(&net, &s, &cr).unwrap(), -1);
    }

    #[test]
    fn degree_constant_zero_and_double_ramp_two() {
        let n = 5u8;
        let net = cycle_network(2 * n as usize);
        let c = Chain1::from_vertex_loop(&(0..2 * n as usize).collect::<Vec<_>>());
        let constant = State::new(vec![3; 2 * n as usize], n);
        assert_eq!(degree(&net, &constant, &c).unwrap(), 0);
        let double = ramp_state(2 * n as usize, n);
        assert_eq!(degree(&net, &double, &c).unwrap(), 2);
    }

    #[test]
    fn degree_refuses_discontinuous_cycle() {
        let net = cycle_network(4);
        let s = State::new(vec![0, 2, 4, 6], 8);
        let c = Chain1::from_vertex_loop(&[0, 1, 2, 3]);
        assert!(matches!(
            degree(&net, &s, &c),
            Err(TopologyError::DiscontinuousOnCycle(0, 1))
        ));
    }

    #[test]
    fn find_seed_on_cycle_and_absent_on_zero() {
        let n = 7u8;
        let net = cycle_network(n as usize);
        let s = ramp_state(n as usize, n);
        let loop_nodes = find_seed(&s, &net).expect("seed present");
        assert_eq!(loop_nodes.len() % n as usize, 0);
        let chain = Chain1::from_vertex_loop(&loop_nodes);
        assert!(chain.is_loop());
        assert_eq!(degree(&net, &s, &chain).unwrap().abs(), 1);
        assert!(find_seed(&State::zero(n as usize, n), &net).is_none());
        assert!(seed_nodes_all(&s, &net).len() == n as usize);
        assert!(seed_nodes_all(&State::zero(n as usize, n), &net).is_empty());
    }

    #[test]
    fn homology_of_disk_square_and_figure_eight() {
        let b = homology_basis(&wheel(6)).unwrap();
        assert_eq!(b.g, 0);

        let b = homology_basis(&hollow_square()).unwrap();
        assert_eq!(b.g, 1);
        assert!(b.basis_cycles[0].is_cycle());
        assert!(!is_null_homologous(&hollow_square(), &b.basis_cycles[0], &b).unwrap());

        // Dense network on a figure-eight hallway: g = 2.
        let (net, _, _) = fig8_net();
        assert!(net.is_connected());
        let b = homology_basis(&net).unwrap();
        assert_eq!(b.g, 2);
    }

    #[test]
    fn disconnected_network_rejected() {
        let net = Network::from_edge_list(&[[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]], &[(0, 1)], 1.0, 1.0);
        assert!(matches!(homology_basis(&net), Err(TopologyError::DisconnectedNetwork)));
    }

    #[test]
    fn null_homology_cases() {
        let w = wheel(5);
        let b = homology_basis(&w).unwrap();
        // Boundary of one triangle (hub, rim i, rim i+1).
        let tri = Chain1::from_vertex_loop(&[0, 1, 2]);
        assert!(is_null_homologous(&w, &tri, &b).unwrap());
        // The full rim bounds the union of the five triangles.
        let rim = Chain1::from_vertex_loop(&[1, 2, 3, 4, 5]);
        assert!(is_null_homologous(&w, &rim, &b).unwrap());

        let sq = hollow_square();
        let bs = homology_basis(&sq).unwrap();
        let c = Chain1::from_vertex_loop(&[0, 1, 2, 3]);
        assert!(!is_null_homologous(&sq, &c, &bs).unwrap());
        // A cycle plus a homologous cycle reversed is null-homologous.
        let sum = c.add(&c.neg());
        assert!(is_null_homologous(&sq, &sum, &bs).unwrap());
        assert!(is_null_homologous(&sq, &Chain1::new(), &bs).unwrap());
        // Non-cycles are refused.
        let mut arc = Chain1::new();
        arc.add_edge(0, 1, 1);
        assert!(matches!(is_null_homologous(&sq, &arc, &bs), Err(TopologyError::NotACycle)));
    }

    #[test]
    fn coordinates_of_basis_cycles_are_unit_vectors() {
        let (net, _, _) = fig8_net();
        let b = homology_basis(&net).unwrap();
        for (i, c) in b.basis_cycles.iter().enumerate() {
            let coords = b.coordinates(&net, c).unwrap();
            let mut expect = vec![0i64; b.g];
            expect[i] = 1;
            assert_eq!(coords, expect);
        }
    }

    #[test]
    fn defect_reports() {
        // All-zero: no defect.
        let sq = hollow_square();
        let b = homology_basis(&sq).unwrap();
        let rep = find_defect(&State::zero(4, 4), &sq, &b);
        assert!(!rep.has_defect);
        assert_eq!(rep.kind, DefectKind::None);

        // Ramp around the square: global defect, degree +-1.
        let s = ramp_state(4, 4);
        let rep = find_defect(&s, &sq, &b);
        assert!(rep.has_defect);
        assert_eq!(rep.kind, DefectKind::Global);
        assert_eq!(rep.basis_degrees[0].unwrap().abs(), 1);

        // Seed on the rim of a wheel: local defect, no basis classes at all.
        let w = wheel(5);
        let bw = homology_basis(&w).unwrap();
        let mut vals = vec![0u8; 6];
        for i in 0..5 {
            vals[1 + i] = i as u8;
        }
        let s = State::new(vals, 5);
        let rep = find_defect(&s, &w, &bw);
        assert!(rep.has_defect);
        assert_eq!(rep.kind, DefectKind::Local);
        assert!(rep.seed.is_some());
    }

    #[test]
    fn cohomology_class_and_addition() {
        let n = 4u8;
        let k = 3 * n as usize; // C_12
        let net = cycle_network(k);
        let b = homology_basis(&net).unwrap();
        assert_eq!(b.g, 1);
        let zero = State::zero(k, n);
        assert_eq!(cohomology_class(&zero, &net, &b).unwrap().coeffs, vec![0]);

        // One wave: ramp 0,1,2,3 then zeros. Support nodes 1..=3.
        let mut w1 = vec![0u8; k];
        for i in 1..n {
            w1[i as usize] = i;
        }
        let w1 = State::new(w1, n);
        let h1 = cohomology_class(&w1, &net, &b).unwrap();
        assert_eq!(h1.coeffs[0].abs(), 1);

        // Second wave far away, same direction.
        let mut w2 = vec![0u8; k];
        for i in 1..n {
            w2[6 + i as usize] = i;
        }
        let w2 = State::new(w2, n);
        let h2 = cohomology_class(&w2, &net, &b).unwrap();
        assert_eq!(h2.coeffs, h1.coeffs);

        let sum = add_states(&w1, &w2, &net).unwrap();
        let hs = cohomology_class(&sum, &net, &b).unwrap();
        assert_eq!(hs.coeffs[0], h1.coeffs[0] + h2.coeffs[0]);

        // Opposite wave: reversed ramp cancels the class.
        let mut w3 = vec![0u8; k];
        for i in 1..n {
            w3[6 + i as usize] = n - i;
        }
        let w3 = State::new(w3, n);
        let diff = add_states(&w1, &w3, &net).unwrap();
        let hd = cohomology_class(&diff, &net, &b).unwrap();
        assert_eq!(hd.coeffs, vec![0]);

        // Identity: adding zero changes nothing.
        let same = add_states(&w1, &zero, &net).unwrap();
        assert_eq!(same.values, w1.values);

        // Touching supports are refused.
        let mut w4 = vec![0u8; k];
        for i in 1..n {
            w4[3 + i as usize] = i;
        }
        let w4 = State::new(w4, n);
        assert!(matches!(
            add_states(&w1, &w4, &net),
            Err(TopologyError::OverlappingSupports(..))
        ));
    }

    #[test]
    fn three_distant_waves_add() {
        let n = 4u8;
        let k = 5 * n as usize; // C_20
        let net = cycle_network(k);
        let b = homology_basis(&net).unwrap();
        let mk = |start: usize| {
            let mut v = vec![0u8; k];
            for i in 1..n {
                v[start + i as usize] = i;
            }
            State::new(v, n)
        };
        let (a, c, e) = (mk(0), mk(6), mk(12));
        let total = add_states(&add_states(&a, &c, &net).unwrap(), &e, &net).unwrap();
        let ht = cohomology_class(&total, &net, &b).unwrap();
        let ha = cohomology_class(&a, &net, &b).unwrap();
        let hc = cohomology_class(&c, &net, &b).unwrap();
        let he = cohomology_class(&e, &net, &b).unwrap();
        assert_eq!(ht.coeffs[0], ha.coeffs[0] + hc.coeffs[0] + he.coeffs[0]);
    }

    #[test]
    fn degree_additive_and_time_invariant() {
        let (net, _, pts) = fig8_net();
        let r = net.comm_radius;
        let b = homology_basis(&net).unwrap();
        let n = 6u8;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..10 {
            // Random continuous ramp field.
            let ang = rng.gen::<f64>() * std::f64::consts::TAU;
            let scale = rng.gen::<f64>() / r;
            let vals: Vec<u8> = pts
                .iter()
                .map(|p| {
                    let t = scale * (p[0] * ang.cos() + p[1] * ang.sin());
                    (t.round().rem_euclid(n as f64)) as u8 % n
                })
                .collect();
            let mut s = State::new(vals, n);
            let alpha = &b.basis_cycles[0];
            let beta = &b.basis_cycles[1];
            let da = degree(&net, &s, alpha).unwrap();
            let db = degree(&net, &s, beta).unwrap();
            let dsum = degree(&net, &s, &alpha.add(beta)).unwrap();
            assert_eq!(dsum, da + db, "additivity, trial {trial}");
            for _ in 0..(3 * n as u64) {
                s = step(&net, &s, None);
                assert_eq!(degree(&net, &s, alpha).unwrap(), da);
                assert_eq!(degree(&net, &s, beta).unwrap(), db);
            }
        }
    }

    #[test]
    fn homologous_cycles_have_equal_degree() {
        let w = wheel(8);
        let b = homology_basis(&w).unwrap();
        assert_eq!(b.g, 0);
        let n = 5u8;
        // A continuous state on the wheel.
        let mut vals = vec![0u8; 9];
        vals[0] = 1;
        let s = State::new(vals, n);
        let rim = Chain1::from_vertex_loop(&[1, 2, 3, 4, 5, 6, 7, 8]);
        let d_rim = degree(&w, &s, &rim).unwrap();
        // Add a triangle boundary: degree unchanged.
        let shifted = rim.add(&Chain1::from_vertex_loop(&[0, 1, 2]));
        assert_eq!(degree(&w, &s, &shifted).unwrap(), d_rim);
        assert_eq!(d_rim, 0);
    }

    #[test]
    fn local_defect_admits_no_continuous_extension() {
        // Seed on the rim of a 5-wheel, n = 5: every hub value conflicts.
        let w = wheel(5);
        let n = 5u8;
        for hub in 0..n {
            let mut vals = vec![hub];
            vals.extend(0..5u8);
            let s = State::new(vals, n);
            assert!(!crate::engine::is_continuous(&w, &s, None).continuous);
        }
        // Sanity: the rim alone is continuous.
        let rim_only: Vec<usize> = (1..=5).collect();
        let mut vals = vec![0u8];
        vals.extend(0..5u8);
        let s = State::new(vals, n);
        assert!(crate::engine::is_continuous(&w, &s, Some(&rim_only)).continuous);
    }

    #[test]
    fn dies_iff_no_defect_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut defect_cases = 0;
        let mut clean_cases = 0;
        for trial in 0..60 {
            // Random connected graph on <= 12 nodes.
            let nodes = 4 + (trial % 9);
            let mut pts = Vec::new();
            for i in 0..nodes {
                let a = i as f64 / nodes as f64 * std::f64::consts::TAU;
                pts.push([a.cos(), a.sin()]);
            }
            let mut edges: Vec<(usize, usize)> = (0..nodes).map(|i| (i, (i + 1) % nodes)).collect();
            for _ in 0..(nodes / 3) {
                let a = rng.gen_range(0..nodes);
                let b = rng.gen_range(0..nodes);
                if a != b {
                    edges.push((a.min(b), a.max(b)));
                }
            }
            let net = Network::from_edge_list(&pts, &edges, 1.0, 1.0);
            let n = 4 + (trial % 3) as u8; // n in 4..=6
            let basis = homology_basis(&net).unwrap();

            // Random continuous state by BFS value propagation.
            let mut vals = vec![u8::MAX; nodes];
            vals[0] = rng.gen_range(0..n);
            let mut queue = std::collections::VecDeque::from([0usize]);
            while let Some(v) = queue.pop_front() {
                for w in net.neighbors(v).collect::<Vec<_>>() {
                    if vals[w] == u8::MAX {
                        let delta: i64 = rng.gen_range(-1..=1);
                        vals[w] = ((i64::from(vals[v]) + delta).rem_euclid(i64::from(n))) as u8;
                        queue.push_back(w);
                    }
                }
            }
            let s = State::new(vals, n);
            if !crate::engine::is_continuous(&net, &s, None).continuous {
                continue;
            }
            let rep = find_defect(&s, &net, &basis);
            let ticks = (nodes as u64) * n as u64;
            let trace = run(&net, &s, ticks, None, SnapshotPolicy::None);
            let died = trace.final_state.is_zero();
            assert_eq!(died, !rep.has_defect, "trial {trial}");
            if rep.has_defect {
                defect_cases += 1;
            } else {
                clean_cases += 1;
            }
        }
        assert!(defect_cases > 0 && clean_cases > 0, "both outcomes exercised");
    }

    #[test]
    fn basis_json_shape() {
        let b = homology_basis(&hollow_square()).unwrap();
        let v = basis_to_json(&b);
        assert_eq!(v["g"], 1);
        assert_eq!(v["cycles"].as_array().unwrap().len(), 1);
        let edge = &v["cycles"][0][0];
        assert_eq!(edge.as_array().unwrap().len(), 3);
    }
}
