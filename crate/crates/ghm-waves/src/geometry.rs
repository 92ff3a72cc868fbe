//! Hallway domains: unions of axis-aligned rectangles, their boundary
//! polylines, and the centerline skeleton graph the domain retracts onto.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("domain needs at least one rectangle")]
    NoRects,
    #[error("rectangle {0} has nonpositive extent")]
    DegenerateRect(usize),
    #[error("rectangle union is not connected")]
    DisconnectedDomain,
    #[error("skeleton loop count {skeleton} does not match boundary hole count {holes}")]
    SkeletonTopologyMismatch { skeleton: usize, holes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Rect { xmin, ymin, xmax, ymax }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        [(self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0]
    }

    /// Closed-set containment: boundary points count as inside.
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    /// Intersection rectangle, if it has positive area.
    pub fn overlap(&self, other: &Rect) -> Option<Rect> {
        let xmin = self.xmin.max(other.xmin);
        let ymin = self.ymin.max(other.ymin);
        let xmax = self.xmax.min(other.xmax);
        let ymax = self.ymax.min(other.ymax);
        if xmin < xmax && ymin < ymax {
            Some(Rect { xmin, ymin, xmax, ymax })
        } else {
            None
        }
    }

    /// Unit vector along the longer side.
    pub fn long_axis(&self) -> Point {
        if self.width() >= self.height() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonEdge {
    pub a: usize,
    pub b: usize,
    /// Corridor centerline; straight segment from vertex a to vertex b.
    pub polyline: Vec<Point>,
    /// Index of the host rectangle the edge runs through.
    pub rect: usize,
}

impl SkeletonEdge {
    pub fn length(&self) -> f64 {
        self.polyline
            .windows(2)
            .map(|w| dist(w[0], w[1]))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonGraph {
    pub vertices: Vec<Point>,
    pub edges: Vec<SkeletonEdge>,
}

impl SkeletonGraph {
    /// First Betti number of the skeleton (edges - vertices + 1 for a
    /// connected graph).
    pub fn loop_count(&self) -> usize {
        (self.edges.len() + 1).saturating_sub(self.vertices.len())
    }

    /// BFS spanning tree from vertex 0; returns the ids of non-tree edges.
    pub fn non_tree_edges(&self) -> Vec<usize> {
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.vertices.len()];
        for (ei, e) in self.edges.iter().enumerate() {
            adj[e.a].push((e.b, ei));
            adj[e.b].push((e.a, ei));
        }
        let mut visited = vec![false; self.vertices.len()];
        let mut tree_edge = vec![false; self.edges.len()];
        let mut queue = std::collections::VecDeque::new();
        if !self.vertices.is_empty() {
            visited[0] = true;
            queue.push_back(0usize);
        }
        while let Some(v) = queue.pop_front() {
            for &(w, ei) in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    tree_edge[ei] = true;
                    queue.push_back(w);
                }
            }
        }
        (0..self.edges.len()).filter(|&ei| !tree_edge[ei]).collect()
    }
}

/// A transversal cut associated with one independent loop of the domain.
///
/// The segment spans the corridor of a non-tree skeleton edge, extended just
/// past both walls. Signed crossings of curves with the cut give the loop's
/// coordinate; the positive side is the `axis` direction.
#[derive(Debug, Clone)]
pub struct LoopCut {
    pub skeleton_edge: usize,
    pub a: Point,
    pub b: Point,
    /// Unit vector along the corridor; crossing in this direction counts +1.
    pub axis: Point,
}

#[derive(Debug, Clone)]
pub struct HallwayDomain {
    pub rects: Vec<Rect>,
    pub skeleton: SkeletonGraph,
    /// Closed boundary polylines (first point not repeated at the end).
    pub boundary: Vec<Vec<Point>>,
    cells: Vec<Rect>,
    cell_cumulative_area: Vec<f64>,
}

pub fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Distance from point `p` to segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

pub fn build_domain(rects: &[Rect]) -> Result<HallwayDomain, GeometryError> {
    if rects.is_empty() {
        return Err(GeometryError::NoRects);
    }
    for (i, r) in rects.iter().enumerate() {
        if !(r.width() > 0.0 && r.height() > 0.0) {
            return Err(GeometryError::DegenerateRect(i));
        }
    }

    // Positive-area overlaps define the junction regions and connectivity.
    let mut overlaps: Vec<(usize, usize, Rect)> = Vec::new();
    for i in 0..rects.len() {
        for j in (i + 1)..rects.len() {
            if let Some(o) = rects[i].overlap(&rects[j]) {
                overlaps.push((i, j, o));
            }
        }
    }
    let mut uf = UnionFind::new(rects.len());
    for &(i, j, _) in &overlaps {
        uf.union(i, j);
    }
    let root = uf.find(0);
    if (1..rects.len()).any(|i| uf.find(i) != root) {
        return Err(GeometryError::DisconnectedDomain);
    }

    let skeleton = build_skeleton(rects, &overlaps);
    let (cells, boundary) = decompose(rects);
    let holes = boundary.len().saturating_sub(1);
    let loops = skeleton.loop_count();
    if loops != holes {
        return Err(GeometryError::SkeletonTopologyMismatch { skeleton: loops, holes });
    }

    let mut cum = Vec::with_capacity(cells.len());
    let mut total = 0.0;
    for c in &cells {
        total += c.area();
        cum.push(total);
    }

    Ok(HallwayDomain { rects: rects.to_vec(), skeleton, boundary, cells, cell_cumulative_area: cum })
}

fn build_skeleton(rects: &[Rect], overlaps: &[(usize, usize, Rect)]) -> SkeletonGraph {
    // One vertex per junction region, chained in order along each corridor's
    // long axis.  A star through the rect center would stack collinear edges
    // on top of each other whenever a corridor has three or more junctions,
    // and overlapping edges break transversal-cut duality (every loop would
    // cross the shared stretch twice with opposite signs).
    let mut vertices: Vec<Point> = Vec::new();
    let mut junctions_of: Vec<Vec<usize>> = vec![Vec::new(); rects.len()];
    for (i, j, o) in overlaps {
        let ov = vertices.len();
        vertices.push(o.center());
        junctions_of[*i].push(ov);
        junctions_of[*j].push(ov);
    }
    let mut edges = Vec::new();
    for (ri, r) in rects.iter().enumerate() {
        let mut chain = junctions_of[ri].clone();
        if chain.len() < 2 {
            // Dead end (or isolated rectangle): anchor the chain at the
            // rect center so every rectangle still hosts a skeleton edge.
            chain.push(vertices.len());
            vertices.push(r.center());
        }
        let ax = r.long_axis();
        chain.sort_by(|&a, &b| {
            let ka = vertices[a][0] * ax[0] + vertices[a][1] * ax[1];
            let kb = vertices[b][0] * ax[0] + vertices[b][1] * ax[1];
            ka.partial_cmp(&kb).unwrap()
        });
        for pair in chain.windows(2) {
            edges.push(SkeletonEdge {
                a: pair[0],
                b: pair[1],
                polyline: vec![vertices[pair[0]], vertices[pair[1]]],
                rect: ri,
            });
        }
    }
    SkeletonGraph { vertices, edges }
}

/// Disjoint cell decomposition from coordinate compression, plus boundary
/// loops stitched from exposed cell sides.
fn decompose(rects: &[Rect]) -> (Vec<Rect>, Vec<Vec<Point>>) {
    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.xmin, r.xmax]).collect();
    let mut ys: Vec<f64> = rects.iter().flat_map(|r| [r.ymin, r.ymax]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let mut inside = vec![false; nx * ny];
    let mut cells = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let cx = (xs[ix] + xs[ix + 1]) / 2.0;
            let cy = (ys[iy] + ys[iy + 1]) / 2.0;
            if rects.iter().any(|r| r.contains([cx, cy])) {
                inside[iy * nx + ix] = true;
                cells.push(Rect::new(xs[ix], ys[iy], xs[ix + 1], ys[iy + 1]));
            }
        }
    }

    // Exposed sides, oriented so the interior is on the left.
    let at = |ix: isize, iy: isize| -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < nx && (iy as usize) < ny && inside[iy as usize * nx + ix as usize]
    };
    let mut segments: Vec<(Point, Point)> = Vec::new();
    for iy in 0..ny as isize {
        for ix in 0..nx as isize {
            if !at(ix, iy) {
                continue;
            }
            let (x0, x1) = (xs[ix as usize], xs[ix as usize + 1]);
            let (y0, y1) = (ys[iy as usize], ys[iy as usize + 1]);
            if !at(ix, iy - 1) {
                segments.push(([x0, y0], [x1, y0]));
            }
            if !at(ix + 1, iy) {
                segments.push(([x1, y0], [x1, y1]));
            }
            if !at(ix, iy + 1) {
                segments.push(([x1, y1], [x0, y1]));
            }
            if !at(ix - 1, iy) {
                segments.push(([x0, y1], [x0, y0]));
            }
        }
    }

    (cells, stitch_loops(segments))
}

fn key(p: Point) -> (u64, u64) {
    (p[0].to_bits(), p[1].to_bits())
}

fn stitch_loops(segments: Vec<(Point, Point)>) -> Vec<Vec<Point>> {
    let mut by_start: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        by_start.entry(key(s.0)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        let mut path = vec![segments[start].0];
        let mut cur = start;
        used[start] = true;
        loop {
            let end = segments[cur].1;
            if key(end) == key(path[0]) {
                break;
            }
            path.push(end);
            let candidates = by_start.get(&key(end)).expect("open boundary chain");
            // At a pinch vertex take the rightmost turn to keep each loop simple.
            let dir = seg_dir(&segments[cur]);
            let next = candidates
                .iter()
                .copied()
                .filter(|&i| !used[i])
                .min_by(|&a, &b| {
                    turn_order(dir, seg_dir(&segments[a]))
                        .total_cmp(&turn_order(dir, seg_dir(&segments[b])))
                })
                .expect("open boundary chain");
            used[next] = true;
            cur = next;
        }
        loops.push(merge_collinear(path));
    }
    loops
}

fn seg_dir(s: &(Point, Point)) -> Point {
    [s.1[0] - s.0[0], s.1[1] - s.0[1]]
}

/// Sort key preferring the sharpest clockwise turn relative to `incoming`.
fn turn_order(incoming: Point, outgoing: Point) -> f64 {
    let cross = incoming[0] * outgoing[1] - incoming[1] * outgoing[0];
    let dot = incoming[0] * outgoing[0] + incoming[1] * outgoing[1];
    // atan2 in (-pi, pi]; smaller = more clockwise.
    cross.atan2(dot)
}

fn merge_collinear(path: Vec<Point>) -> Vec<Point> {
    let m = path.len();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let prev = path[(i + m - 1) % m];
        let cur = path[i];
        let next = path[(i + 1) % m];
        let c = (cur[0] - prev[0]) * (next[1] - cur[1]) - (cur[1] - prev[1]) * (next[0] - cur[0]);
        if c.abs() > 1e-12 {
            out.push(cur);
        }
    }
    out
}

impl HallwayDomain {
    pub fn contains(&self, p: Point) -> bool {
        self.rects.iter().any(|r| r.contains(p))
    }

    pub fn area(&self) -> f64 {
        self.cells.iter().map(Rect::area).sum()
    }

    /// First Betti number of the domain.
    pub fn loop_count(&self) -> usize {
        self.skeleton.loop_count()
    }

    pub fn hole_count(&self) -> usize {
        self.boundary.len().saturating_sub(1)
    }

    pub fn bounding_box(&self) -> Rect {
        let mut b = self.rects[0];
        for r in &self.rects[1..] {
            b.xmin = b.xmin.min(r.xmin);
            b.ymin = b.ymin.min(r.ymin);
            b.xmax = b.xmax.max(r.xmax);
            b.ymax = b.ymax.max(r.ymax);
        }
        b
    }

    /// i.i.d. uniform samples over the rectangle union; deterministic per seed.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = *self.cell_cumulative_area.last().unwrap();
        let mut pts = Vec::with_capacity(count);
        for _ in 0..count {
            let t = rng.gen::<f64>() * total;
            let idx = self
                .cell_cumulative_area
                .partition_point(|&c| c <= t)
                .min(self.cells.len() - 1);
            let c = &self.cells[idx];
            let x = c.xmin + rng.gen::<f64>() * c.width();
            let y = c.ymin + rng.gen::<f64>() * c.height();
            pts.push([x, y]);
        }
        pts
    }

    /// The disjoint rectangle decomposition used for sampling.
    pub fn decomposition(&self) -> &[Rect] {
        &self.cells
    }

    pub fn distance_to_boundary_component(&self, p: Point, component: usize) -> f64 {
        let poly = &self.boundary[component];
        let m = poly.len();
        (0..m)
            .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % m]))
            .fold(f64::INFINITY, f64::min)
    }

    /// One transversal cut per independent loop, in non-tree skeleton edge
    /// order.
    pub fn loop_cuts(&self) -> Vec<LoopCut> {
        let non_tree = self.skeleton.non_tree_edges();
        let mut cuts = Vec::with_capacity(non_tree.len());
        for ei in non_tree {
            let e = &self.skeleton.edges[ei];
            let rect = &self.rects[e.rect];
            let va = self.skeleton.vertices[e.a];
            let vb = self.skeleton.vertices[e.b];
            let mut axis = [vb[0] - va[0], vb[1] - va[1]];
            let len = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
            if len < 1e-9 {
                axis = rect.long_axis();
            } else {
                axis = [axis[0] / len, axis[1] / len];
            }
            // Slide the cut point along the edge until it is clear of every
            // junction region of the host rectangle.
            let junctions: Vec<Rect> = self
                .rects
                .iter()
                .enumerate()
                .filter(|(ri, _)| *ri != e.rect)
                .filter_map(|(_, r)| rect.overlap(r))
                .collect();
            let mut center = mid(va, vb);
            for t in [0.5, 0.35, 0.65, 0.25, 0.75, 0.45, 0.55, 0.15, 0.85] {
                let p = lerp(va, vb, t);
                if !junctions.iter().any(|j| j.contains(p)) {
                    center = p;
                    break;
                }
            }
            // Tiny deterministic jitter keeps crossings away from node ties.
            center = [center[0] + 1.3e-7, center[1] + 2.7e-7];
            let normal = [-axis[1], axis[0]];
            // Clip the transversal to the host rectangle only: extending it to
            // the rest of the domain would let it pierce a parallel corridor,
            // where a loop would cross it a second time with opposite sign.
            let (t_lo, t_hi) = clip_line_to_rect(center, normal, rect);
            let over = 0.2 * rect.width().min(rect.height());
            let a = [
                center[0] + (t_lo - over) * normal[0],
                center[1] + (t_lo - over) * normal[1],
            ];
            let b = [
                center[0] + (t_hi + over) * normal[0],
                center[1] + (t_hi + over) * normal[1],
            ];
            cuts.push(LoopCut { skeleton_edge: ei, a, b, axis });
        }
        cuts
    }
}

fn mid(a: Point, b: Point) -> Point {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Binary-search the segment from `inside` to `outside` for a point just
/// beyond the domain wall, leaving a small overhang.
/// Parameter range `t` for which `origin + t * dir` lies inside `rect`.
fn clip_line_to_rect(origin: Point, dir: Point, rect: &Rect) -> (f64, f64) {
    let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (o, d, lo, hi) in [
        (origin[0], dir[0], rect.xmin, rect.xmax),
        (origin[1], dir[1], rect.ymin, rect.ymax),
    ] {
        if d.abs() < 1e-12 {
            continue;
        }
        let (t0, t1) = ((lo - o) / d, (hi - o) / d);
        t_lo = t_lo.max(t0.min(t1));
        t_hi = t_hi.min(t0.max(t1));
    }
    if t_lo > t_hi {
        (0.0, 0.0)
    } else {
        (t_lo, t_hi)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let r = self.find(self.parent[i]);
            self.parent[i] = r;
        }
        self.parent[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Standard test fixtures shared across the crate.
pub fn annulus_frame(outer: f64, width: f64) -> Vec<Rect> {
    vec![
        Rect::new(0.0, 0.0, outer, width),
        Rect::new(outer - width, 0.0, outer, outer),
        Rect::new(0.0, outer - width, outer, outer),
        Rect::new(0.0, 0.0, width, outer),
    ]
}

pub fn figure_eight(span: f64, width: f64) -> Vec<Rect> {
    let w = width;
    vec![
        Rect::new(0.0, 0.0, 2.0 * span + w, w),
        Rect::new(0.0, span, 2.0 * span + w, span + w),
        Rect::new(0.0, 0.0, w, span + w),
        Rect::new(span, 0.0, span + w, span + w),
        Rect::new(2.0 * span, 0.0, 2.0 * span + w, span + w),
    ]
}
