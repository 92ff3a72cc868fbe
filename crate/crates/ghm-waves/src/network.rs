//! Geometric communication graphs: radius-r adjacency, the Rips 2-skeleton,
//! shadow coverage, boundary paths, and the boundary-sensor augmentation.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use thiserror::Error;

use crate::geometry::{dist, dist2, point_segment_distance, HallwayDomain, Point};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network is not connected")]
    DisconnectedNetwork,
    #[error("no boundary path spans boundary component {0}")]
    NoBoundaryPath(usize),
}

#[derive(Debug, Clone)]
pub struct Network {
    pub positions: Vec<Point>,
    pub comm_radius: f64,
    pub coverage_radius: f64,
    /// Per-node sorted neighbor list, paired with the incident edge id.
    pub adjacency: Vec<Vec<(usize, usize)>>,
    /// Lexicographically sorted (i, j) with i < j.
    pub edges: Vec<(usize, usize)>,
    /// Flag-rule triangles (i, j, k), i < j < k, pairwise adjacent.
    pub triangles: Vec<(usize, usize, usize)>,
    /// For augmentation clones: id of the original node whose state and
    /// coverage the clone copies. `None` for real sensors.
    pub clone_of: Vec<Option<usize>>,
}

/// Uniform grid over node positions for O(1) amortized neighbor queries.
pub struct GridHash {
    cell: f64,
    x0: f64,
    y0: f64,
    bins: HashMap<(i64, i64), Vec<usize>>,
}

impl GridHash {
    pub fn build(points: &[Point], cell: f64) -> Self {
        let x0 = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let y0 = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let mut bins: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let kx = ((p[0] - x0) / cell).floor() as i64;
            let ky = ((p[1] - y0) / cell).floor() as i64;
            bins.entry((kx, ky)).or_default().push(i);
        }
        GridHash { cell, x0, y0, bins }
    }

    /// Candidate ids in the 3x3 block of cells around `p`.
    pub fn near(&self, p: Point) -> impl Iterator<Item = usize> + '_ {
        let kx = ((p[0] - self.x0) / self.cell).floor() as i64;
        let ky = ((p[1] - self.y0) / self.cell).floor() as i64;
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                self.bins
                    .get(&(kx + dx, ky + dy))
                    .into_iter()
                    .flatten()
                    .copied()
            })
        })
    }
}

impl Network {
    pub fn build(points: &[Point], comm_radius: f64, coverage_radius: f64) -> Network {
        assert!(comm_radius > 0.0 && coverage_radius > 0.0 && !points.is_empty());
        let clone_of = vec![None; points.len()];
        Self::build_with_clones(points, comm_radius, coverage_radius, clone_of)
    }

    pub fn build_with_clones(
        points: &[Point],
        comm_radius: f64,
        coverage_radius: f64,
        clone_of: Vec<Option<usize>>,
    ) -> Network {
        let n = points.len();
        let r2 = comm_radius * comm_radius;
        let grid = GridHash::build(points, comm_radius);
        let mut neighbor_sets: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in grid.near(points[i]) {
                if j > i && dist2(points[i], points[j]) <= r2 {
                    neighbor_sets[i].push(j);
                    neighbor_sets[j].push(i);
                }
            }
        }
        for s in &mut neighbor_sets {
            s.sort_unstable();
        }
        Self::from_adjacency(points.to_vec(), comm_radius, coverage_radius, neighbor_sets, clone_of)
    }

    /// Explicit-topology constructor for hand-built instances: adjacency is
    /// the given edge list rather than the metric rule. Triangles still
    /// follow the flag rule on that adjacency.
    pub fn from_edge_list(
        points: &[Point],
        edge_list: &[(usize, usize)],
        comm_radius: f64,
        coverage_radius: f64,
    ) -> Network {
        let mut neighbor_sets: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
        for &(i, j) in edge_list {
            assert!(i != j && i < points.len() && j < points.len());
            neighbor_sets[i].push(j);
            neighbor_sets[j].push(i);
        }
        for s in &mut neighbor_sets {
            s.sort_unstable();
            s.dedup();
        }
        let clone_of = vec![None; points.len()];
        Self::from_adjacency(points.to_vec(), comm_radius, coverage_radius, neighbor_sets, clone_of)
    }

    /// Assemble edge ids and flag triangles from a symmetric adjacency.
    fn from_adjacency(
        positions: Vec<Point>,
        comm_radius: f64,
        coverage_radius: f64,
        neighbor_sets: Vec<Vec<usize>>,
        clone_of: Vec<Option<usize>>,
    ) -> Network {
        let n = positions.len();
        let mut edges = Vec::new();
        for (i, ns) in neighbor_sets.iter().enumerate() {
            for &j in ns {
                if j > i {
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
        for (id, &e) in edges.iter().enumerate() {
            edge_id.insert(e, id);
        }
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (i, ns) in neighbor_sets.iter().enumerate() {
            for &j in ns {
                let key = if i < j { (i, j) } else { (j, i) };
                adjacency[i].push((j, edge_id[&key]));
            }
        }
        // Triangles: for each edge, common neighbors above j.
        let mut triangles = Vec::new();
        for &(i, j) in &edges {
            let (a, b) = (&neighbor_sets[i], &neighbor_sets[j]);
            let (mut x, mut y) = (0, 0);
            while x < a.len() && y < b.len() {
                match a[x].cmp(&b[y]) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => {
                        if a[x] > j {
                            triangles.push((i, j, a[x]));
                        }
                        x += 1;
                        y += 1;
                    }
                }
            }
        }
        Network { positions, comm_radius, coverage_radius, adjacency, edges, triangles, clone_of }
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(|&(j, _)| j)
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].iter().any(|&(k, _)| k == j)
    }

    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        self.adjacency[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, id)| id)
    }

    /// Center of the node's coverage disk. Clones keep the original's disk.
    pub fn coverage_center(&self, i: usize) -> Point {
        match self.clone_of[i] {
            Some(orig) => self.positions[orig],
            None => self.positions[i],
        }
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// New network with the given edges dropped; triangles follow the flag
    /// rule on the remaining adjacency.
    pub fn remove_edges(&self, drop: &HashSet<(usize, usize)>) -> Network {
        let canon = |i: usize, j: usize| if i < j { (i, j) } else { (j, i) };
        let mut neighbor_sets: Vec<Vec<usize>> = vec![Vec::new(); self.node_count()];
        for &(i, j) in &self.edges {
            if !drop.contains(&canon(i, j)) {
                neighbor_sets[i].push(j);
                neighbor_sets[j].push(i);
            }
        }
        for s in &mut neighbor_sets {
            s.sort_unstable();
        }
        Self::from_adjacency(
            self.positions.clone(),
            self.comm_radius,
            self.coverage_radius,
            neighbor_sets,
            self.clone_of.clone(),
        )
    }

    /// Node CSV (`node_id,x,y`) and edge CSV (`i,j`), deterministic order.
    pub fn write_csv<W: Write>(&self, nodes: &mut W, edges: &mut W) -> std::io::Result<()> {
        writeln!(nodes, "node_id,x,y")?;
        for (i, p) in self.positions.iter().enumerate() {
            writeln!(nodes, "{},{},{}", i, p[0], p[1])?;
        }
        writeln!(edges, "i,j")?;
        for &(i, j) in &self.edges {
            writeln!(edges, "{i},{j}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMode<'a> {
    /// Union of convex hulls of all simplices (vertices, edges, triangles).
    Shadow,
    /// Union of coverage disks of the given node set.
    Disks(&'a [usize]),
}

#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub resolution: f64,
    pub uncovered_cells: Vec<(i64, i64)>,
    pub covered_fraction: f64,
}

/// Rasterize domain coverage at the given cell size.
pub fn shadow_covers(
    network: &Network,
    domain: &HallwayDomain,
    resolution: f64,
    mode: CoverageMode,
) -> CoverageReport {
    assert!(resolution > 0.0);
    let bbox = domain.bounding_box();
    let nx = ((bbox.xmax - bbox.xmin) / resolution).ceil() as i64;
    let ny = ((bbox.ymax - bbox.ymin) / resolution).ceil() as i64;
    let center = |ix: i64, iy: i64| -> Point {
        [
            bbox.xmin + (ix as f64 + 0.5) * resolution,
            bbox.ymin + (iy as f64 + 0.5) * resolution,
        ]
    };

    // Bin triangles / disks by covered cell range to avoid full scans.
    let mut covered = HashSet::new();
    match mode {
        CoverageMode::Shadow => {
            let eps = 1e-9;
            for &(i, j, k) in &network.triangles {
                let (a, b, c) = (network.positions[i], network.positions[j], network.positions[k]);
                let (xlo, xhi) = min_max3(a[0], b[0], c[0]);
                let (ylo, yhi) = min_max3(a[1], b[1], c[1]);
                for_cells_in(bbox.xmin, bbox.ymin, resolution, xlo, xhi, ylo, yhi, |ix, iy| {
                    if in_triangle(center(ix, iy), a, b, c, eps) {
                        covered.insert((ix, iy));
                    }
                });
            }
            for &(i, j) in &network.edges {
                let (a, b) = (network.positions[i], network.positions[j]);
                let (xlo, xhi) = (a[0].min(b[0]), a[0].max(b[0]));
                let (ylo, yhi) = (a[1].min(b[1]), a[1].max(b[1]));
                for_cells_in(bbox.xmin, bbox.ymin, resolution, xlo, xhi, ylo, yhi, |ix, iy| {
                    if point_segment_distance(center(ix, iy), a, b) <= eps {
                        covered.insert((ix, iy));
                    }
                });
            }
        }
        CoverageMode::Disks(ids) => {
            let eps = network.coverage_radius;
            for &i in ids {
                let p = network.coverage_center(i);
                for_cells_in(
                    bbox.xmin,
                    bbox.ymin,
                    resolution,
                    p[0] - eps,
                    p[0] + eps,
                    p[1] - eps,
                    p[1] + eps,
                    |ix, iy| {
                        if dist(center(ix, iy), p) <= eps {
                            covered.insert((ix, iy));
                        }
                    },
                );
            }
        }
    }

    let mut uncovered = Vec::new();
    let mut domain_cells = 0usize;
    for iy in 0..ny {
        for ix in 0..nx {
            if !domain.contains(center(ix, iy)) {
                continue;
            }
            domain_cells += 1;
            if !covered.contains(&(ix, iy)) {
                uncovered.push((ix, iy));
            }
        }
    }
    let covered_fraction = if domain_cells == 0 {
        1.0
    } else {
        (domain_cells - uncovered.len()) as f64 / domain_cells as f64
    };
    CoverageReport { resolution, uncovered_cells: uncovered, covered_fraction }
}

fn min_max3(a: f64, b: f64, c: f64) -> (f64, f64) {
    (a.min(b).min(c), a.max(b).max(c))
}

#[allow(clippy::too_many_arguments)]
fn for_cells_in(
    x0: f64,
    y0: f64,
    res: f64,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
    mut f: impl FnMut(i64, i64),
) {
    let ix0 = ((xlo - x0) / res).floor() as i64 - 1;
    let ix1 = ((xhi - x0) / res).ceil() as i64 + 1;
    let iy0 = ((ylo - y0) / res).floor() as i64 - 1;
    let iy1 = ((yhi - y0) / res).ceil() as i64 + 1;
    for iy in iy0..=iy1 {
        for ix in ix0..=ix1 {
            f(ix, iy);
        }
    }
}

fn in_triangle(p: Point, a: Point, b: Point, c: Point, eps: f64) -> bool {
    let sign = |p1: Point, p2: Point, p3: Point| {
        (p1[0] - p3[0]) * (p2[1] - p3[1]) - (p2[0] - p3[0]) * (p1[1] - p3[1])
    };
    let d1 = sign(p, a, b);
    let d2 = sign(p, b, c);
    let d3 = sign(p, c, a);
    let has_neg = d1 < -eps || d2 < -eps || d3 < -eps;
    let has_pos = d1 > eps || d2 > eps || d3 > eps;
    !(has_neg && has_pos)
}

#[derive(Debug, Clone)]
pub struct LocalHoleReport {
    pub rips_h1_rank: usize,
    pub domain_loops: usize,
    pub has_local_hole: bool,
    /// A basis cycle witnessing the mismatch, when one stands out: a Rips
    /// class invisible to every skeleton loop cut.
    pub witness: Option<crate::topology::Chain1>,
}

/// Rank-level local-hole test: the Rips H1 rank must equal the domain's
/// loop count, and the basis must project one-to-one onto the skeleton's
/// loops (unimodular crossing matrix). Any mismatch reports a hole.
pub fn local_hole_check(
    network: &Network,
    domain: &HallwayDomain,
) -> Result<LocalHoleReport, crate::topology::TopologyError> {
    let basis = crate::topology::homology_basis(network)?;
    let g = domain.loop_count();
    let cuts = domain.loop_cuts();
    let witness = basis
        .basis_cycles
        .iter()
        .find(|c| {
            crate::waves::skeleton_signature(network, &cuts, c)
                .iter()
                .all(|&v| v == 0)
        })
        .cloned();
    let aligned = basis.g == g
        && crate::waves::skeleton_alignment(network, domain, &basis).is_ok();
    Ok(LocalHoleReport {
        rips_h1_rank: basis.g,
        domain_loops: g,
        has_local_hole: !aligned,
        witness: if aligned { None } else { witness },
    })
}

#[derive(Debug, Clone)]
pub struct BoundaryPath {
    pub node_ids: Vec<usize>,
    pub boundary_component_index: usize,
    /// True when the path's coverage reaches around the whole component.
    pub closed: bool,
}

/// Arc-length samples of a closed boundary polyline.
fn sample_component(domain: &HallwayDomain, component: usize, step: f64) -> Vec<Point> {
    let poly = &domain.boundary[component];
    let m = poly.len();
    let mut samples = Vec::new();
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        let len = dist(a, b);
        let k = (len / step).ceil().max(1.0) as usize;
        for t in 0..k {
            let f = t as f64 / k as f64;
            samples.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
        }
    }
    samples
}

/// Greedy boundary-path extraction, ordered by boundary arc length.
pub fn extract_boundary_paths(
    network: &Network,
    domain: &HallwayDomain,
) -> Vec<Option<BoundaryPath>> {
    let eps = network.coverage_radius;
    let step = (eps.min(network.comm_radius) / 8.0).max(1e-3);
    let mut out = Vec::with_capacity(domain.boundary.len());
    for comp in 0..domain.boundary.len() {
        let samples = sample_component(domain, comp, step);
        // Candidates: nodes whose coverage disk meets the component,
        // keyed by the arc index of the nearest sample.
        let mut candidates: Vec<(usize, usize)> = Vec::new(); // (arc index, node)
        for i in 0..network.node_count() {
            if network.clone_of[i].is_some() {
                continue;
            }
            let p = network.positions[i];
            let mut best = (f64::INFINITY, 0usize);
            for (si, &s) in samples.iter().enumerate() {
                let d = dist(p, s);
                if d < best.0 {
                    best = (d, si);
                }
            }
            if best.0 <= eps {
                candidates.push((best.1, i));
            }
        }
        candidates.sort_unstable();
        if candidates.is_empty() {
            out.push(None);
            continue;
        }
        let pair_ok = |x: usize, y: usize| -> bool {
            let (px, py) = (network.positions[x], network.positions[y]);
            samples.iter().any(|&s| dist(s, px) <= eps && dist(s, py) <= eps)
        };
        let mut node_ids = vec![candidates[0].1];
        let mut seen: HashSet<usize> = node_ids.iter().copied().collect();
        for &(_, node) in &candidates[1..] {
            let cur = *node_ids.last().unwrap();
            if seen.contains(&node) {
                continue;
            }
            if network.are_neighbors(cur, node) && pair_ok(cur, node) {
                node_ids.push(node);
                seen.insert(node);
            }
        }
        // Does the path's coverage span the component?
        let spans = samples
            .iter()
            .all(|&s| node_ids.iter().any(|&i| dist(network.positions[i], s) <= eps));
        let closed = node_ids.len() > 2 && {
            let (first, last) = (node_ids[0], *node_ids.last().unwrap());
            network.are_neighbors(first, last) && pair_ok(first, last)
        };
        if spans {
            out.push(Some(BoundaryPath { node_ids, boundary_component_index: comp, closed }));
        } else {
            out.push(None);
        }
    }
    out
}

/// Add boundary clones so the Rips shadow reaches the walls, without
/// changing per-tick coverage. Returns the enlarged network; clone ids map
/// back to originals via `clone_of`.
pub fn augment_boundary_sensors(
    network: &Network,
    domain: &HallwayDomain,
) -> Result<Network, NetworkError> {
    let paths = extract_boundary_paths(network, domain);
    let mut positions = network.positions.clone();
    let mut clone_of = network.clone_of.clone();
    let eps = network.coverage_radius;
    for (comp, path) in paths.iter().enumerate() {
        let path = path.as_ref().ok_or(NetworkError::NoBoundaryPath(comp))?;
        let step = (eps.min(network.comm_radius) / 16.0).max(1e-3);
        let samples = sample_component(domain, comp, step);
        let nearest = |p: Point| -> Point {
            *samples
                .iter()
                .min_by(|a, b| dist(p, **a).total_cmp(&dist(p, **b)))
                .unwrap()
        };
        for &x in &path.node_ids {
            positions.push(nearest(network.positions[x]));
            clone_of.push(Some(x));
        }
        let mut pairs: Vec<(usize, usize)> =
            path.node_ids.windows(2).map(|w| (w[0], w[1])).collect();
        if path.closed {
            pairs.push((*path.node_ids.last().unwrap(), path.node_ids[0]));
        }
        for (x, y) in pairs {
            let (px, py) = (network.positions[x], network.positions[y]);
            // Point on the wall closest to equidistant from both disks.
            let z = samples
                .iter()
                .filter(|&&s| dist(s, px) <= eps && dist(s, py) <= eps)
                .min_by(|a, b| {
                    dist(px, **a)
                        .max(dist(py, **a))
                        .total_cmp(&dist(px, **b).max(dist(py, **b)))
                })
                .copied();
            if let Some(z) = z {
                positions.push(z);
                clone_of.push(Some(x));
            }
        }
    }
    Ok(Network::build_with_clones(
        &positions,
        network.comm_radius,
        network.coverage_radius,
        clone_of,
    ))
}
