//! Pulse programming: construct single waves along corridors, sever the
//! links that keep local defects alive, and realize arbitrary target
//! cohomology classes by wave placement.

use std::collections::HashSet;

use thiserror::Error;

use crate::engine::{is_barrier, is_continuous, State};
use crate::geometry::{HallwayDomain, LoopCut, Point};
use crate::network::Network;
use crate::topology::{cohomology_class, Chain1, CohomClass, H1Basis, TopologyError};

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("anchor {anchor} outside corridor edge of length {length}")]
    AnchorOutOfRange { anchor: f64, length: f64 },
    #[error("band too sparse: no node for profile index {index}")]
    SparseBand { index: usize },
    #[error("continuity repair failed on edge ({0}, {1})")]
    ContinuityRepairFailed(usize, usize),
    #[error(
        "corridor for skeleton edge {edge} too short: need {required:.2}, have {available:.2}"
    )]
    InsufficientCorridorLength { edge: usize, required: f64, available: f64 },
    #[error("basis does not match the domain's loop structure")]
    BasisMismatch,
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Placement of one wave pulse along a corridor centerline.
///
/// `direction` is the homological sign: a cycle crossing the corridor along
/// the skeleton-edge axis (vertex a toward b) picks up degree `direction`
/// from the wave. The pulse itself travels the other way, toward its
/// leading zeros.
#[derive(Debug, Clone, Copy)]
pub struct WaveSpec {
    pub corridor_edge: usize,
    /// Arc-length position of the profile's zero index along the edge.
    pub anchor: f64,
    pub direction: i8,
    pub n: u8,
    /// Centerline advance per profile step; defaults to the communication
    /// radius, which makes the ramp provably continuous.
    pub hop: Option<f64>,
}

fn unit(v: Point) -> Point {
    let l = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / l, v[1] / l]
}

/// Arc-length extent of the rectangle along `axis`, measured from `origin`.
fn rect_extent(rect: &crate::geometry::Rect, origin: Point, axis: Point) -> (f64, f64) {
    let corners = [
        [rect.xmin, rect.ymin],
        [rect.xmax, rect.ymin],
        [rect.xmin, rect.ymax],
        [rect.xmax, rect.ymax],
    ];
    let ss = corners.map(|c| (c[0] - origin[0]) * axis[0] + (c[1] - origin[1]) * axis[1]);
    (
        ss.iter().cloned().fold(f64::INFINITY, f64::min),
        ss.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Corridor frame of a skeleton edge: origin, unit axis, and the arc range
/// this edge owns.  The range covers the edge itself, extended to the host
/// rectangle's wall on any side whose endpoint is not a junction (a corridor
/// may host several skeleton edges, and each must claim a disjoint stretch).
fn edge_extent(
    domain: &HallwayDomain,
    corridor_edge: usize,
) -> (Point, Point, f64, f64) {
    let e = &domain.skeleton.edges[corridor_edge];
    let rect = &domain.rects[e.rect];
    let va = domain.skeleton.vertices[e.a];
    let vb = domain.skeleton.vertices[e.b];
    let axis = unit([vb[0] - va[0], vb[1] - va[1]]);
    let (r_lo, r_hi) = rect_extent(rect, va, axis);
    let in_junction = |p: Point| {
        domain.rects.iter().enumerate().any(|(ri, other)| {
            ri != e.rect && rect.overlap(other).is_some_and(|ov| ov.contains(p))
        })
    };
    let s_lo = if in_junction(va) { 0.0 } else { r_lo };
    let s_hi = if in_junction(vb) { e.length() } else { r_hi };
    (va, axis, s_lo, s_hi)
}

/// Build a single travelling pulse: the ramp 0,1,…,n−1,0 across one
/// alphabet cycle of the corridor band, zero elsewhere.
pub fn single_wave(
    network: &Network,
    domain: &HallwayDomain,
    spec: &WaveSpec,
) -> Result<State, WaveError> {
    assert!(spec.direction == 1 || spec.direction == -1);
    let n = spec.n;
    let e = &domain.skeleton.edges[spec.corridor_edge];
    let rect = &domain.rects[e.rect];
    let (va, axis, s_lo, s_hi) = edge_extent(domain, spec.corridor_edge);
    if !(s_lo..=s_hi).contains(&spec.anchor) {
        return Err(WaveError::AnchorOutOfRange { anchor: spec.anchor, length: s_hi - s_lo });
    }
    let h = spec.hop.unwrap_or(network.comm_radius);
    let r = network.comm_radius;
    let p0 = [va[0] + spec.anchor * axis[0], va[1] + spec.anchor * axis[1]];

    // Profile index per node: k = round(direction * s / h); indices 0..=n
    // form the band, values k mod n.
    let dir = f64::from(spec.direction);
    let mut values = vec![0u8; network.node_count()];
    let mut band_nodes: Vec<(usize, f64, i64)> = Vec::new(); // (node, s along edge, k)
    for i in 0..network.node_count() {
        if network.clone_of[i].is_some() {
            continue;
        }
        let p = network.positions[i];
        if !rect.contains(p) {
            continue;
        }
        let s = (p[0] - p0[0]) * axis[0] + (p[1] - p0[1]) * axis[1];
        let k = (dir * s / h).round() as i64;
        if (0..=i64::from(n)).contains(&k) {
            values[i] = (k % i64::from(n)) as u8;
            band_nodes.push((i, s + spec.anchor, k));
        }
    }
    for i in 0..network.node_count() {
        if let Some(orig) = network.clone_of[i] {
            values[i] = values[orig];
        }
    }

    // Density: every interior profile index must be populated, and no
    // centerline gap of r/2 may be empty within the band.
    for k in 1..i64::from(n) {
        if !band_nodes.iter().any(|&(_, _, bk)| bk == k) {
            return Err(WaveError::SparseBand { index: k as usize });
        }
    }
    let mut ss: Vec<f64> = band_nodes.iter().map(|&(_, s, _)| s).collect();
    ss.sort_by(f64::total_cmp);
    for w in ss.windows(2) {
        if w[1] - w[0] > r {
            let index = ((w[0] + w[1]) / 2.0 / h) as usize;
            return Err(WaveError::SparseBand { index: index.min(n as usize) });
        }
    }

    let mut state = State::new(values, n);
    state = repair_continuity(network, state)?;

    // The leading and trailing zero slabs of the band must each cut the
    // corridor; together with the ramp this is the supporting barrier.
    let front: Vec<usize> = band_nodes
        .iter()
        .filter(|&&(i, _, k)| (k == 0 || k == i64::from(n)) && state.values[i] == 0)
        .map(|&(i, _, _)| i)
        .collect();
    assert!(
        is_barrier(network, &front, domain, rect).unwrap_or(false),
        "wave band does not barricade its corridor"
    );
    Ok(state)
}

/// One repair pass: snap each endpoint of a violating edge to the nearest
/// value consistent with all of its neighbors, then re-check.
fn repair_continuity(network: &Network, mut state: State) -> Result<State, WaveError> {
    let check = is_continuous(network, &state, None);
    if check.continuous {
        return Ok(state);
    }
    let n = state.n;
    let fits = |state: &State, x: usize, v: u8| {
        network.neighbors(x).all(|y| {
            let d = (i64::from(state.values[y]) - i64::from(v)).rem_euclid(i64::from(n));
            d == 0 || d == 1 || d == i64::from(n) - 1
        })
    };
    for x in 0..network.node_count() {
        if fits(&state, x, state.values[x]) {
            continue;
        }
        let cur = state.values[x];
        let mut candidates: Vec<u8> = (0..n).collect();
        candidates.sort_by_key(|&v| {
            let d = (i64::from(v) - i64::from(cur)).rem_euclid(i64::from(n));
            d.min(i64::from(n) - d)
        });
        if let Some(&v) = candidates.iter().find(|&&v| fits(&state, x, v)) {
            state.values[x] = v;
        }
    }
    let check = is_continuous(network, &state, None);
    match check.violating_edge {
        None => Ok(state),
        Some((i, j)) => Err(WaveError::ContinuityRepairFailed(i, j)),
    }
}

/// Remove every link whose endpoint states read (0, 1) at this tick — the
/// paper's switch for killing defect-sustained waves.
pub fn sever_defect_links(network: &Network, state: &State) -> Network {
    sever_defect_links_within(network, state, None)
}

/// Like [`sever_defect_links`] but restricted to edges with at least one
/// endpoint in `scope`, leaving distant waves untouched.
pub fn sever_defect_links_within(
    network: &Network,
    state: &State,
    scope: Option<&[usize]>,
) -> Network {
    let members: Option<HashSet<usize>> = scope.map(|s| s.iter().copied().collect());
    let mut drop = HashSet::new();
    for &(i, j) in &network.edges {
        let pair = (state.values[i], state.values[j]);
        if pair != (0, 1) && pair != (1, 0) {
            continue;
        }
        if members
            .as_ref()
            .is_none_or(|m| m.contains(&i) || m.contains(&j))
        {
            drop.insert((i, j));
        }
    }
    if drop.is_empty() {
        network.clone()
    } else {
        network.remove_edges(&drop)
    }
}

/// Signed crossing of segment p -> q over the cut, counted along the cut's
/// corridor axis.
fn crossing_sign(p: Point, q: Point, cut: &LoopCut) -> i64 {
    let orient = |a: Point, b: Point, c: Point| -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = orient(cut.a, cut.b, p);
    let d2 = orient(cut.a, cut.b, q);
    let d3 = orient(p, q, cut.a);
    let d4 = orient(p, q, cut.b);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        let along = (q[0] - p[0]) * cut.axis[0] + (q[1] - p[1]) * cut.axis[1];
        if along > 0.0 {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

/// Crossing counts of a chain over each loop cut: the skeleton-level
/// coordinates of its homology class.
pub fn skeleton_signature(network: &Network, cuts: &[LoopCut], chain: &Chain1) -> Vec<i64> {
    cuts.iter()
        .map(|cut| {
            chain
                .terms
                .iter()
                .map(|(&(i, j), &c)| {
                    c * crossing_sign(network.positions[i], network.positions[j], cut)
                })
                .sum()
        })
        .collect()
}

/// Exact integer determinant by fraction-free elimination.
pub fn det_int(m: &[Vec<i64>]) -> i64 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|row| row.iter().map(|&v| i128::from(v)).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| a[i][k] != 0) else { return 0 };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[k][k] * a[i][j] - a[i][k] * a[k][j]) / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    (sign * a[n - 1][n - 1]) as i64
}

/// The change of coordinates between the Rips basis and the domain's loop
/// cuts. Unimodularity certifies the basis projects onto the skeleton's
/// loops one-to-one.
pub fn skeleton_alignment(
    network: &Network,
    domain: &HallwayDomain,
    basis: &H1Basis,
) -> Result<(Vec<LoopCut>, Vec<Vec<i64>>), WaveError> {
    let cuts = domain.loop_cuts();
    if basis.g != cuts.len() {
        return Err(WaveError::BasisMismatch);
    }
    let m: Vec<Vec<i64>> = (0..cuts.len())
        .map(|i| {
            basis
                .basis_cycles
                .iter()
                .map(|c| skeleton_signature(network, &cuts[i..=i], c)[0])
                .collect()
        })
        .collect();
    if det_int(&m).abs() != 1 {
        return Err(WaveError::BasisMismatch);
    }
    Ok((cuts, m))
}

/// Realize a prescribed cohomology class as a sum of disjoint single waves.
pub fn realize_class(
    network: &Network,
    domain: &HallwayDomain,
    basis: &H1Basis,
    target: &CohomClass,
) -> Result<State, WaveError> {
    assert_eq!(target.coeffs.len(), basis.g);
    let (cuts, m) = skeleton_alignment(network, domain, basis)?;
    let counts: Vec<(usize, usize)> = cuts
        .iter()
        .enumerate()
        .map(|(ci, cut)| {
            let y: i64 = (0..basis.g).map(|j| m[ci][j] * target.coeffs[j]).sum();
            (cut.skeleton_edge, y.unsigned_abs() as usize)
        })
        .collect();
    let n = infer_alphabet(network, domain, &counts)?;
    realize_class_with(network, domain, basis, target, n, None)
}

/// [`realize_class`] with explicit alphabet size and hop.
pub fn realize_class_with(
    network: &Network,
    domain: &HallwayDomain,
    basis: &H1Basis,
    target: &CohomClass,
    n: u8,
    hop: Option<f64>,
) -> Result<State, WaveError> {
    let (cuts, m) = skeleton_alignment(network, domain, basis)?;
    // Wave counts per skeleton loop so the Rips-basis total equals target.
    let y: Vec<i64> = (0..basis.g)
        .map(|i| (0..basis.g).map(|j| m[i][j] * target.coeffs[j]).sum())
        .collect();

    let h = hop.unwrap_or(network.comm_radius);
    let r = network.comm_radius;
    let band = (f64::from(n) + 1.0) * h;
    let mut total = State::zero(network.node_count(), n);
    for (ci, cut) in cuts.iter().enumerate() {
        let count = y[ci].unsigned_abs() as usize;
        if count == 0 {
            continue;
        }
        let direction = y[ci].signum() as i8;
        let anchors = plan_anchors(domain, cut.skeleton_edge, count, band, r).map_err(
            |(required, available)| WaveError::InsufficientCorridorLength {
                edge: cut.skeleton_edge,
                required,
                available,
            },
        )?;
        for band_start in anchors {
            let anchor = if direction == 1 {
                band_start + h / 2.0
            } else {
                band_start + band - h / 2.0
            };
            let spec = WaveSpec {
                corridor_edge: cut.skeleton_edge,
                anchor,
                direction,
                n,
                hop: Some(h),
            };
            let wave = single_wave(network, domain, &spec)?;
            total = crate::topology::add_states(&total, &wave, network)?;
        }
    }
    let achieved = cohomology_class(&total, network, basis)?;
    assert_eq!(&achieved, target, "realized class must match the target");
    Ok(total)
}

/// A spec for one wave whose band fits the corridor of the given skeleton
/// edge, clear of its junctions.
pub fn fitted_wave_spec(
    network: &Network,
    domain: &HallwayDomain,
    corridor_edge: usize,
    n: u8,
    direction: i8,
    hop: Option<f64>,
) -> Result<WaveSpec, WaveError> {
    let h = hop.unwrap_or(network.comm_radius);
    let band = (f64::from(n) + 1.0) * h;
    let starts = plan_anchors(domain, corridor_edge, 1, band, network.comm_radius).map_err(
        |(required, available)| WaveError::InsufficientCorridorLength {
            edge: corridor_edge,
            required,
            available,
        },
    )?;
    let anchor = if direction == 1 {
        starts[0] + h / 2.0
    } else {
        starts[0] + band - h / 2.0
    };
    Ok(WaveSpec { corridor_edge, anchor, direction, n, hop: Some(h) })
}

/// Band start positions along the corridor: packed into the stretches of
/// centerline clear of junction regions, with `sep` between bands.
fn plan_anchors(
    domain: &HallwayDomain,
    skeleton_edge: usize,
    count: usize,
    band: f64,
    sep: f64,
) -> Result<Vec<f64>, (f64, f64)> {
    let e = &domain.skeleton.edges[skeleton_edge];
    let rect = &domain.rects[e.rect];
    let (va, axis, s_lo, s_hi) = edge_extent(domain, skeleton_edge);
    // Blocked arc intervals: junction overlaps, padded by the separation.
    let mut blocked: Vec<(f64, f64)> = Vec::new();
    for (ri, other) in domain.rects.iter().enumerate() {
        if ri == e.rect {
            continue;
        }
        let Some(ov) = rect.overlap(other) else { continue };
        let corners = [
            [ov.xmin, ov.ymin],
            [ov.xmax, ov.ymin],
            [ov.xmin, ov.ymax],
            [ov.xmax, ov.ymax],
        ];
        let ss: Vec<f64> = corners
            .iter()
            .map(|c| (c[0] - va[0]) * axis[0] + (c[1] - va[1]) * axis[1])
            .collect();
        let lo = ss.iter().cloned().fold(f64::INFINITY, f64::min) - sep;
        let hi = ss.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + sep;
        blocked.push((lo, hi));
    }
    blocked.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Free stretches of the corridor's arc range.
    let mut free: Vec<(f64, f64)> = Vec::new();
    let mut cursor = s_lo;
    for &(lo, hi) in &blocked {
        if lo > cursor {
            free.push((cursor, lo.min(s_hi)));
        }
        cursor = cursor.max(hi);
    }
    if cursor < s_hi {
        free.push((cursor, s_hi));
    }
    let mut anchors = Vec::new();
    let mut best = 0.0f64;
    for (lo, hi) in free {
        let mut s = lo;
        best = best.max(hi - lo);
        while anchors.len() < count && s + band <= hi {
            anchors.push(s);
            s += band + sep;
        }
    }
    if anchors.len() < count {
        let required = count as f64 * (band + sep);
        return Err((required, best));
    }
    Ok(anchors)
}

/// Largest alphabet in 3..=20 whose bands still fit the requested number of
/// waves on every corridor; a convenience for [`realize_class`].
fn infer_alphabet(
    network: &Network,
    domain: &HallwayDomain,
    counts: &[(usize, usize)],
) -> Result<u8, WaveError> {
    let h = network.comm_radius;
    'outer: for n in (3..=20u8).rev() {
        let band = (f64::from(n) + 1.0) * h;
        for &(edge, count) in counts {
            if count == 0 {
                continue;
            }
            if plan_anchors(domain, edge, count, band, h).is_err() {
                continue 'outer;
            }
        }
        return Ok(n);
    }
    // Report the corridor that still fails at the smallest alphabet.
    for &(edge, count) in counts {
        if count == 0 {
            continue;
        }
        if let Err((required, available)) = plan_anchors(domain, edge, count, 4.0 * h, h) {
            return Err(WaveError::InsufficientCorridorLength { edge, required, available });
        }
    }
    unreachable!("alphabet search failed but every corridor fits at n = 3");
}
