//! Geometric events on FK configurations: connections inside a region,
//! ghost-free crossings, ghost-connected circuits, necklaces of large
//! clusters and block goodness.
//!
//! Inside an annulus, clusters are formed by the open internal edges whose
//! endpoints both lie in the annulus and are geometric nearest neighbors;
//! a cluster is ghost-connected when one of its sites has an open ghost
//! edge. Wired-boundary links outside the annulus are not used.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::clusters::UnionFind;
use crate::lattice::{boundary_sites, FkConfig, GhostGraph, LatticeSpec, Rect, Region, RegionKind, Side, Site, NO_SITE};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Witness {
    /// Sites along a path of open edges.
    Path(Vec<Site>),
    /// Cyclic list of sites, consecutive ones nearest neighbors.
    Circuit(Vec<Site>),
    /// Cluster ids (smallest site index of each annulus cluster) in the
    /// order a surrounding circuit visits them, and the circuit itself.
    Necklace { clusters: Vec<usize>, circuit: Vec<Site> },
}

impl Witness {
    /// Number of sites in the path or circuit.
    pub fn len(&self) -> usize {
        match self {
            Witness::Path(p) | Witness::Circuit(p) => p.len(),
            Witness::Necklace { circuit, .. } => circuit.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventReport {
    pub occurred: bool,
    pub witness: Option<Witness>,
}

impl EventReport {
    fn none() -> Self {
        EventReport {
            occurred: false,
            witness: None,
        }
    }

    fn with(w: Witness) -> Self {
        EventReport {
            occurred: true,
            witness: Some(w),
        }
    }

    pub fn witness_len(&self) -> usize {
        self.witness.as_ref().map_or(0, Witness::len)
    }
}

fn require_in_region(spec: &LatticeSpec, region: &Region, site: Site) -> Result<usize> {
    let i = spec.check_site(site)?;
    if !region.contains(spec, site) {
        return Err(Error::InvalidRegion(format!("site {site} is outside the region")));
    }
    Ok(i)
}

/// Sites reachable from `start` through open internal edges with both
/// endpoints in `region`.
fn flood(graph: &GhostGraph, fk: &FkConfig, region: &Region, start: usize) -> Vec<bool> {
    let spec = graph.spec();
    let mut seen = vec![false; graph.num_sites()];
    seen[start] = true;
    let mut queue = vec![start];
    while let Some(u) = queue.pop() {
        let nb = graph.neighbors(u);
        let ne = graph.neighbor_edges(u);
        for k in 0..4 {
            let v = nb[k];
            if v == NO_SITE || seen[v as usize] || !fk.internal[ne[k] as usize] {
                continue;
            }
            if region.contains_index(spec, v as usize) {
                seen[v as usize] = true;
                queue.push(v as usize);
            }
        }
    }
    seen
}

/// Whether an open path inside `within` joins `x` and `y`.
pub fn connected(graph: &GhostGraph, fk: &FkConfig, x: Site, y: Site, within: &Region) -> Result<bool> {
    fk.check(graph)?;
    let spec = graph.spec();
    let (xi, yi) = (require_in_region(spec, within, x)?, require_in_region(spec, within, y)?);
    Ok(flood(graph, fk, within, xi)[yi])
}

/// Whether an open path inside `within` joins `x` to a site with an open
/// ghost edge.
pub fn connected_to_ghost(graph: &GhostGraph, fk: &FkConfig, x: Site, within: &Region) -> Result<bool> {
    fk.check(graph)?;
    let xi = require_in_region(graph.spec(), within, x)?;
    Ok(flood(graph, fk, within, xi)
        .iter()
        .zip(&fk.external)
        .any(|(&r, &g)| r && g))
}

/// Clusters of an annulus: label per site (`NO_SITE` outside), with the
/// label equal to the smallest site index of the cluster.
pub(crate) struct AnnulusClusters {
    pub inside: Vec<bool>,
    pub label: Vec<u32>,
    pub size: Vec<u32>,
    pub ghost: Vec<bool>,
}

/// Geometric east and north neighbors inside the lattice (no wrapping),
/// with the internal edge joining them.
fn forward_edges(graph: &GhostGraph, u: usize) -> [(u32, u32); 2] {
    let spec = graph.spec();
    let Site { col, row } = spec.site(u);
    let nb = graph.neighbors(u);
    let ne = graph.neighbor_edges(u);
    let east = if col + 1 < spec.width { (nb[0], ne[0]) } else { (NO_SITE, NO_SITE) };
    let north = if row + 1 < spec.height { (nb[2], ne[2]) } else { (NO_SITE, NO_SITE) };
    [east, north]
}

pub(crate) fn annulus_clusters(graph: &GhostGraph, fk: &FkConfig, region: &Region) -> AnnulusClusters {
    let spec = graph.spec();
    let n = graph.num_sites();
    let inside: Vec<bool> = (0..n).map(|u| region.contains_index(spec, u)).collect();
    let mut uf = UnionFind::new(n);
    for u in 0..n {
        if !inside[u] {
            continue;
        }
        for (v, e) in forward_edges(graph, u) {
            if v != NO_SITE && inside[v as usize] && fk.internal[e as usize] {
                uf.union(u as u32, v);
            }
        }
    }
    let mut label = vec![NO_SITE; n];
    let mut size = vec![0u32; n];
    let mut ghost = vec![false; n];
    let mut root_label = vec![NO_SITE; n];
    for u in 0..n {
        if !inside[u] {
            continue;
        }
        let r = uf.find(u as u32) as usize;
        if root_label[r] == NO_SITE {
            root_label[r] = u as u32;
        }
        let l = root_label[r];
        label[u] = l;
        size[l as usize] += 1;
        ghost[l as usize] |= fk.external[u];
    }
    AnnulusClusters {
        inside,
        label,
        size,
        ghost,
    }
}

fn require_annulus(graph: &GhostGraph, fk: &FkConfig, region: &Region) -> Result<Rect> {
    fk.check(graph)?;
    if !graph.spec().boundary.is_planar() {
        return Err(Error::UnsupportedBoundary(
            "annulus events need a planar (non-periodic) lattice".into(),
        ));
    }
    match (region.kind(), region.hole()) {
        (RegionKind::Annulus, Some(h)) => Ok(h),
        _ => Err(Error::InvalidRegion("annulus events need an annulus region".into())),
    }
}

/// A ghost-free open crossing: some annulus cluster without an open ghost
/// edge contains a site adjacent to the hole and a site adjacent to the
/// outside. The witness is an open path between two such sites.
pub fn detect_event_f(graph: &GhostGraph, fk: &FkConfig, annulus: &Region) -> Result<EventReport> {
    require_annulus(graph, fk, annulus)?;
    let spec = graph.spec();
    let inner = boundary_sites(spec, annulus, Side::Inner)?;
    let outer = boundary_sites(spec, annulus, Side::Outer)?;
    let ac = annulus_clusters(graph, fk, annulus);
    let n = graph.num_sites();
    let mut is_outer = vec![false; n];
    let mut outer_clusters = vec![false; n];
    for s in &outer {
        let u = spec.index(*s);
        is_outer[u] = true;
        outer_clusters[ac.label[u] as usize] = true;
    }
    let start = inner.iter().map(|s| spec.index(*s)).find(|&u| {
        let l = ac.label[u] as usize;
        !ac.ghost[l] && outer_clusters[l]
    });
    let Some(start) = start else {
        return Ok(EventReport::none());
    };
    // breadth-first path inside the cluster to the nearest outer site
    let mut parent = vec![NO_SITE; n];
    parent[start] = start as u32;
    let mut queue = VecDeque::from([start]);
    let mut end = start;
    'bfs: while let Some(u) = queue.pop_front() {
        if is_outer[u] {
            end = u;
            break;
        }
        let nb = graph.neighbors(u);
        let ne = graph.neighbor_edges(u);
        for k in 0..4 {
            let v = nb[k];
            if v == NO_SITE || parent[v as usize] != NO_SITE || !fk.internal[ne[k] as usize] {
                continue;
            }
            if ac.inside[v as usize] && adjacent(spec, u, v as usize) {
                parent[v as usize] = u as u32;
                if is_outer[v as usize] {
                    end = v as usize;
                    break 'bfs;
                }
                queue.push_back(v as usize);
            }
        }
    }
    let mut path = vec![spec.site(end)];
    let mut u = end;
    while u != start {
        u = parent[u] as usize;
        path.push(spec.site(u));
    }
    path.reverse();
    Ok(EventReport::with(Witness::Path(path)))
}

fn adjacent(spec: &LatticeSpec, u: usize, v: usize) -> bool {
    let (a, b) = (spec.site(u), spec.site(v));
    a.col.abs_diff(b.col) + a.row.abs_diff(b.row) == 1
}

/// Signed crossings of the step `a -> b` with the horizontal ray from
/// `(hole.x0, hole.y0 + 1/2)` toward `+x`.
fn crossing(hole: &Rect, a: Site, b: Site) -> i64 {
    let (ax, ay, bx, by) = (a.col as i64, a.row as i64, b.col as i64, b.row as i64);
    if ax == bx && ax > hole.x0 && ay.min(by) == hole.y0 {
        if by > ay {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

/// A circuit of sites with `good[u]` that winds once around the hole,
/// using nearest-neighbor steps inside the lattice.
pub(crate) fn surrounding_circuit(spec: &LatticeSpec, hole: &Rect, good: &[bool]) -> Option<Vec<usize>> {
    let n = spec.num_sites();
    let w = spec.width;
    let mut potential = vec![0i64; n];
    let mut parent = vec![NO_SITE; n];
    let mut depth = vec![0u32; n];
    let neighbors = |u: usize| {
        let (c, r) = (u % w, u / w);
        let mut out = [NO_SITE; 4];
        if c + 1 < w {
            out[0] = (u + 1) as u32;
        }
        if c > 0 {
            out[1] = (u - 1) as u32;
        }
        if r + 1 < spec.height {
            out[2] = (u + w) as u32;
        }
        if r > 0 {
            out[3] = (u - w) as u32;
        }
        out
    };
    for root in 0..n {
        if !good[root] || parent[root] != NO_SITE {
            continue;
        }
        parent[root] = root as u32;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in neighbors(u) {
                if v == NO_SITE || !good[v as usize] {
                    continue;
                }
                let v = v as usize;
                let c = crossing(hole, spec.site(u), spec.site(v));
                if parent[v] == NO_SITE {
                    parent[v] = u as u32;
                    potential[v] = potential[u] + c;
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                } else if potential[u] + c != potential[v] {
                    return Some(fundamental_cycle(&parent, &depth, u, v));
                }
            }
        }
    }
    None
}

/// Tree path `lca -> u`, then `v -> lca` without the `lca`.
fn fundamental_cycle(parent: &[u32], depth: &[u32], u: usize, v: usize) -> Vec<usize> {
    let (mut a, mut b) = (u, v);
    let mut left = Vec::new();
    let mut right = Vec::new();
    while depth[a] > depth[b] {
        left.push(a);
        a = parent[a] as usize;
    }
    while depth[b] > depth[a] {
        right.push(b);
        b = parent[b] as usize;
    }
    while a != b {
        left.push(a);
        right.push(b);
        a = parent[a] as usize;
        b = parent[b] as usize;
    }
    left.push(a);
    left.reverse();
    left.extend(right);
    left
}

/// A circuit of sites surrounding the hole whose every site is
/// ghost-connected within the annulus. The witness is the circuit.
pub fn detect_event_g(graph: &GhostGraph, fk: &FkConfig, annulus: &Region) -> Result<EventReport> {
    let hole = require_annulus(graph, fk, annulus)?;
    Ok(ghost_circuit(graph, fk, annulus, &hole))
}

fn ghost_circuit(graph: &GhostGraph, fk: &FkConfig, annulus: &Region, hole: &Rect) -> EventReport {
    let spec = graph.spec();
    let ac = annulus_clusters(graph, fk, annulus);
    let good: Vec<bool> = (0..graph.num_sites())
        .map(|u| ac.inside[u] && ac.ghost[ac.label[u] as usize])
        .collect();
    match surrounding_circuit(spec, hole, &good) {
        Some(c) => EventReport::with(Witness::Circuit(c.into_iter().map(|u| spec.site(u)).collect())),
        None => EventReport::none(),
    }
}

/// Parameters of a necklace search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecklaceQuery {
    /// Largest number of distinct clusters allowed.
    pub max_clusters: usize,
    /// Smallest admissible cluster size, in sites.
    pub min_mass: f64,
    /// Only ghost-connected clusters are admissible.
    pub ghost_only: bool,
}

/// At most `k` distinct annulus clusters, each of at least `min_mass`
/// sites, whose union contains a circuit of sites surrounding the hole.
/// Consecutive clusters along such a circuit are at lattice distance one,
/// so they form a cyclic chain.
pub fn detect_necklace(graph: &GhostGraph, fk: &FkConfig, annulus: &Region, k: usize, min_mass: f64) -> Result<EventReport> {
    necklace(
        graph,
        fk,
        annulus,
        &NecklaceQuery {
            max_clusters: k,
            min_mass,
            ghost_only: false,
        },
    )
}

/// Necklace search with all options.
pub fn necklace(graph: &GhostGraph, fk: &FkConfig, annulus: &Region, q: &NecklaceQuery) -> Result<EventReport> {
    let hole = require_annulus(graph, fk, annulus)?;
    if q.max_clusters < 1 {
        return Err(Error::InvalidParams("a necklace needs K >= 1".into()));
    }
    if !q.min_mass.is_finite() && q.min_mass != f64::NEG_INFINITY {
        return Err(Error::InvalidParams(format!("invalid mass floor {}", q.min_mass)));
    }
    Ok(necklace_search(graph, fk, annulus, &hole, q))
}

fn necklace_search(graph: &GhostGraph, fk: &FkConfig, annulus: &Region, hole: &Rect, q: &NecklaceQuery) -> EventReport {
    let spec = graph.spec();
    let n = graph.num_sites();
    let ac = annulus_clusters(graph, fk, annulus);
    let admissible = |l: usize| f64::from(ac.size[l]) >= q.min_mass && (!q.ghost_only || ac.ghost[l]);
    let good: Vec<bool> = (0..n).map(|u| ac.inside[u] && admissible(ac.label[u] as usize)).collect();
    if surrounding_circuit(spec, hole, &good).is_none() {
        return EventReport::none();
    }
    // admissible clusters and their distance-one adjacency
    let ids: Vec<usize> = (0..n).filter(|&u| ac.inside[u] && ac.label[u] as usize == u && admissible(u)).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &c) in ids.iter().enumerate() {
        index[c] = i;
    }
    let mut adj = vec![Vec::new(); ids.len()];
    for u in 0..n {
        if !good[u] {
            continue;
        }
        for (v, _) in forward_edges(graph, u) {
            if v == NO_SITE || !good[v as usize] {
                continue;
            }
            let (a, b) = (index[ac.label[u] as usize], index[ac.label[v as usize] as usize]);
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let check = |set: &[usize]| -> Option<Vec<usize>> {
        let mut member = vec![false; ids.len()];
        for &i in set {
            member[i] = true;
        }
        let sub: Vec<bool> = (0..n).map(|u| good[u] && member[index[ac.label[u] as usize]]).collect();
        surrounding_circuit(spec, hole, &sub)
    };
    // connected subsets in increasing size, each grown from its smallest member
    for size in 1..=q.max_clusters.min(ids.len()) {
        for root in 0..ids.len() {
            let mut found = None;
            let mut set = vec![root];
            let ext: Vec<usize> = adj[root].iter().copied().filter(|&x| x > root).collect();
            grow(&adj, root, &mut set, ext, size, &mut |s| {
                if found.is_none() {
                    found = check(s);
                }
                found.is_some()
            });
            if let Some(circuit) = found {
                return EventReport::with(necklace_witness(spec, &ac.label, &circuit));
            }
        }
    }
    EventReport::none()
}

/// Enumerates connected vertex sets of exactly `target` vertices containing
/// `set` (whose smallest vertex is `root`), extending only by vertices
/// larger than `root`. Stops when `visit` returns true.
fn grow(
    adj: &[Vec<usize>],
    root: usize,
    set: &mut Vec<usize>,
    ext: Vec<usize>,
    target: usize,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if set.len() == target {
        return visit(set);
    }
    let mut ext = ext;
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &x in &adj[w] {
            if x > root && !set.contains(&x) && !ext.contains(&x) && !next.contains(&x) && !is_neighbor_of(adj, set, x) {
                next.push(x);
            }
        }
        set.push(w);
        if grow(adj, root, set, next, target, visit) {
            return true;
        }
        set.pop();
    }
    false
}

fn is_neighbor_of(adj: &[Vec<usize>], set: &[usize], x: usize) -> bool {
    set.iter().any(|&s| adj[s].binary_search(&x).is_ok())
}

fn necklace_witness(spec: &LatticeSpec, label: &[u32], circuit: &[usize]) -> Witness {
    let mut clusters: Vec<usize> = Vec::new();
    for &u in circuit {
        let l = label[u] as usize;
        if clusters.last() != Some(&l) {
            clusters.push(l);
        }
    }
    while clusters.len() > 1 && clusters.first() == clusters.last() {
        clusters.pop();
    }
    Witness::Necklace {
        clusters,
        circuit: circuit.iter().map(|&u| spec.site(u)).collect(),
    }
}

fn block_region(spec: &LatticeSpec, corner: Site, scale: usize) -> Result<Region> {
    if scale < 1 {
        return Err(Error::InvalidParams("block scale must be at least 1".into()));
    }
    if corner.col + 3 * scale >= spec.width || corner.row + 3 * scale >= spec.height {
        return Err(Error::InvalidRegion(format!(
            "block of scale {scale} at {corner} does not fit a {}x{} lattice",
            spec.width, spec.height
        )));
    }
    Region::block_annulus((corner.col as i64, corner.row as i64), scale as i64)
}

/// Goodness of the block with lower-left corner `corner` and scale `N`:
/// the annulus `corner + ([0,3N]^2 \ [N,2N]^2)` carries a cyclic chain of
/// ghost-connected clusters whose union surrounds the inner box.
///
/// The block must lie inside the lattice; on a periodic lattice no
/// wrapping edge is used.
pub fn block_good(graph: &GhostGraph, fk: &FkConfig, corner: Site, scale: usize) -> Result<bool> {
    fk.check(graph)?;
    let region = block_region(graph.spec(), corner, scale)?;
    let hole = region.hole().expect("block annulus has a hole");
    Ok(ghost_circuit(graph, fk, &region, &hole).occurred)
}

/// Goodness of every unit translate of the scale-`N` block that fits in
/// the lattice; `grid[row][col]` is the block with that lower-left corner.
pub fn block_field_scan(graph: &GhostGraph, fk: &FkConfig, scale: usize) -> Result<Vec<Vec<bool>>> {
    fk.check(graph)?;
    let spec = graph.spec();
    if scale < 1 {
        return Err(Error::InvalidParams("block scale must be at least 1".into()));
    }
    let span = 3 * scale;
    if spec.width < span + 2 || spec.height < span + 2 {
        return Err(Error::InvalidParams(format!(
            "a {}x{} lattice holds fewer than 2x2 blocks of scale {scale}",
            spec.width, spec.height
        )));
    }
    (0..spec.height - span)
        .map(|row| {
            (0..spec.width - span)
                .map(|col| block_good(graph, fk, Site::new(col, row), scale))
                .collect()
        })
        .collect()
}

/// Even-odd test: does the closed polygon through `circuit` enclose the
/// point just above and right of the hole's lower-left corner?
fn encloses_hole(circuit: &[Site], hole: &Rect) -> bool {
    // vertical ray from (x0 + 1/4, y0 + 1/4) toward +y crosses horizontal
    // unit segments between columns x0 and x0 + 1 at heights above y0
    let mut inside = false;
    for i in 0..circuit.len() {
        let (a, b) = (circuit[i], circuit[(i + 1) % circuit.len()]);
        let (ax, ay, bx, by) = (a.col as i64, a.row as i64, b.col as i64, b.row as i64);
        if ay == by && ax.min(bx) == hole.x0 && ax.max(bx) == hole.x0 + 1 && ay > hole.y0 {
            inside = !inside;
        }
    }
    inside
}

fn witness_error(msg: impl Into<String>) -> Error {
    Error::Degenerate(format!("invalid witness: {}", msg.into()))
}

fn check_circuit(spec: &LatticeSpec, region: &Region, hole: &Rect, circuit: &[Site]) -> Result<()> {
    if circuit.len() < 4 {
        return Err(witness_error("circuit shorter than four sites"));
    }
    let mut seen = std::collections::HashSet::new();
    for (i, &s) in circuit.iter().enumerate() {
        if !region.contains(spec, s) {
            return Err(witness_error(format!("circuit site {s} is outside the annulus")));
        }
        if !seen.insert(s) {
            return Err(witness_error(format!("circuit repeats {s}")));
        }
        let t = circuit[(i + 1) % circuit.len()];
        if s.col.abs_diff(t.col) + s.row.abs_diff(t.row) != 1 {
            return Err(witness_error(format!("{s} and {t} are not neighbors")));
        }
    }
    if !encloses_hole(circuit, hole) {
        return Err(witness_error("circuit does not surround the hole"));
    }
    Ok(())
}

/// Which event a report answers, for witness validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    F,
    G,
    Necklace(NecklaceQuery),
}

/// Re-checks a report's witness against the configuration: every claimed
/// edge is open, every claimed site lies where it should, the circuit
/// surrounds the hole and the cluster conditions hold.
pub fn validate_report(graph: &GhostGraph, fk: &FkConfig, annulus: &Region, kind: EventKind, report: &EventReport) -> Result<()> {
    let hole = require_annulus(graph, fk, annulus)?;
    let spec = graph.spec();
    let w = match (&report.witness, report.occurred) {
        (None, false) => return Ok(()),
        (Some(_), false) => return Err(witness_error("witness on a non-occurring event")),
        (None, true) => return Err(witness_error("missing witness")),
        (Some(w), true) => w,
    };
    let ac = annulus_clusters(graph, fk, annulus);
    match (kind, w) {
        (EventKind::F, Witness::Path(path)) => {
            let first = *path.first().ok_or_else(|| witness_error("empty path"))?;
            let last = *path.last().unwrap();
            if !boundary_sites(spec, annulus, Side::Inner)?.contains(&first) {
                return Err(witness_error(format!("{first} is not next to the hole")));
            }
            if !boundary_sites(spec, annulus, Side::Outer)?.contains(&last) {
                return Err(witness_error(format!("{last} is not next to the outside")));
            }
            for pair in path.windows(2) {
                let (u, v) = (spec.index(pair[0]), spec.index(pair[1]));
                if !region_edge_open(graph, fk, annulus, u, v) {
                    return Err(witness_error(format!("no open edge {} - {}", pair[0], pair[1])));
                }
            }
            // the whole annulus cluster of the path avoids the ghost
            let reach = flood_planar(graph, fk, &ac.inside, spec.index(first));
            if reach.iter().zip(&fk.external).any(|(&r, &g)| r && g) {
                return Err(witness_error("the crossing cluster touches the ghost"));
            }
            Ok(())
        }
        (EventKind::G, Witness::Circuit(c)) => {
            check_circuit(spec, annulus, &hole, c)?;
            for &s in c {
                let reach = flood_planar(graph, fk, &ac.inside, spec.index(s));
                if !reach.iter().zip(&fk.external).any(|(&r, &g)| r && g) {
                    return Err(witness_error(format!("{s} is not ghost-connected in the annulus")));
                }
            }
            Ok(())
        }
        (EventKind::Necklace(q), Witness::Necklace { clusters, circuit }) => {
            check_circuit(spec, annulus, &hole, circuit)?;
            let mut distinct = clusters.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() > q.max_clusters {
                return Err(witness_error(format!("{} clusters exceed K = {}", distinct.len(), q.max_clusters)));
            }
            let mut visited: Vec<usize> = Vec::new();
            for &s in circuit {
                let reach = flood_planar(graph, fk, &ac.inside, spec.index(s));
                let id = reach.iter().position(|&r| r).unwrap();
                let mass = reach.iter().filter(|&&r| r).count();
                if (mass as f64) < q.min_mass {
                    return Err(witness_error(format!("cluster {id} has {mass} sites")));
                }
                if q.ghost_only && !reach.iter().zip(&fk.external).any(|(&r, &g)| r && g) {
                    return Err(witness_error(format!("cluster {id} is not ghost-connected")));
                }
                if visited.last() != Some(&id) {
                    visited.push(id);
                }
            }
            while visited.len() > 1 && visited.first() == visited.last() {
                visited.pop();
            }
            if &visited != clusters {
                return Err(witness_error("cluster sequence does not match the circuit"));
            }
            Ok(())
        }
        _ => Err(witness_error("witness of the wrong shape")),
    }
}

fn region_edge_open(graph: &GhostGraph, fk: &FkConfig, region: &Region, u: usize, v: usize) -> bool {
    let spec = graph.spec();
    if !region.contains_index(spec, u) || !region.contains_index(spec, v) || !adjacent(spec, u, v) {
        return false;
    }
    let nb = graph.neighbors(u);
    let ne = graph.neighbor_edges(u);
    (0..4).any(|k| nb[k] as usize == v && fk.internal[ne[k] as usize])
}

/// Flood fill over open edges between geometric neighbors inside `inside`.
fn flood_planar(graph: &GhostGraph, fk: &FkConfig, inside: &[bool], start: usize) -> Vec<bool> {
    let spec = graph.spec();
    let mut seen = vec![false; graph.num_sites()];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        let nb = graph.neighbors(u);
        let ne = graph.neighbor_edges(u);
        for k in 0..4 {
            let v = nb[k];
            if v == NO_SITE || seen[v as usize] || !inside[v as usize] || !fk.internal[ne[k] as usize] {
                continue;
            }
            if adjacent(spec, u, v as usize) {
                seen[v as usize] = true;
                stack.push(v as usize);
            }
        }
    }
    seen
}
