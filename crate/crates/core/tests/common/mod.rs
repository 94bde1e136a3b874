//! Independent brute-force oracles shared by the integration tests.
//!
//! Everything here is written from the event definitions directly, without
//! the library's union-find, winding or cluster-chain search.

#![allow(dead_code)]

use ghost_ising::transfer::VerticalBoundary;
use ghost_ising::{FkConfig, GhostGraph, LatticeSpec, Region};
use rand::Rng;

pub fn random_fk(graph: &GhostGraph, p_bond: f64, p_ghost: f64, rng: &mut impl Rng) -> FkConfig {
    FkConfig {
        internal: (0..graph.num_internal()).map(|_| rng.gen_bool(p_bond)).collect(),
        external: (0..graph.num_sites()).map(|_| rng.gen_bool(p_ghost)).collect(),
    }
}

/// Open internal edges as `(u, v)` site pairs that are geometric nearest
/// neighbors (no wrap-around).
pub fn open_geometric_edges(graph: &GhostGraph, fk: &FkConfig) -> Vec<(usize, usize)> {
    let spec = graph.spec();
    graph
        .internal_edges()
        .iter()
        .zip(&fk.internal)
        .filter(|(_, &open)| open)
        .map(|(e, _)| (e[0] as usize, e[1] as usize))
        .filter(|&(u, v)| {
            let (a, b) = (spec.site(u), spec.site(v));
            a.col.abs_diff(b.col) + a.row.abs_diff(b.row) == 1
        })
        .collect()
}

/// Cluster label per annulus site (`usize::MAX` outside) by depth-first
/// search over open edges with both endpoints in the annulus.
pub fn dfs_clusters(graph: &GhostGraph, fk: &FkConfig, region: &Region) -> Vec<usize> {
    let spec = graph.spec();
    let n = graph.num_sites();
    let inside: Vec<bool> = (0..n).map(|u| region.contains_index(spec, u)).collect();
    let mut adj = vec![Vec::new(); n];
    for (u, v) in open_geometric_edges(graph, fk) {
        if inside[u] && inside[v] {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if !inside[s] || label[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        label[s] = next;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    label
}

fn annulus_rects(region: &Region) -> (ghost_ising::Rect, ghost_ising::Rect) {
    (region.outer_rect(), region.hole().expect("annulus"))
}

/// Point classes around an annulus: hole, ring (in lattice and region), or
/// exterior (outside the outer rectangle or off the lattice).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Place {
    Hole,
    Ring,
    Exterior,
}

pub fn place(spec: &LatticeSpec, region: &Region, x: i64, y: i64) -> Place {
    let (outer, hole) = annulus_rects(region);
    if hole.contains(x, y) {
        Place::Hole
    } else if outer.contains(x, y) && spec.contains(x, y) {
        Place::Ring
    } else {
        Place::Exterior
    }
}

const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

fn touches(spec: &LatticeSpec, region: &Region, u: usize, steps: &[(i64, i64)], target: Place) -> bool {
    let s = spec.site(u);
    steps
        .iter()
        .any(|&(dx, dy)| place(spec, region, s.col as i64 + dx, s.row as i64 + dy) == target)
}

/// Event F by cluster scan: some annulus cluster without an open ghost edge
/// has a site next to the hole and a site next to the exterior.
pub fn brute_f(graph: &GhostGraph, fk: &FkConfig, region: &Region) -> bool {
    let spec = graph.spec();
    let label = dfs_clusters(graph, fk, region);
    let n = graph.num_sites();
    let k = label.iter().filter(|&&l| l != usize::MAX).max().map_or(0, |m| m + 1);
    let (mut inner, mut outer, mut ghost) = (vec![false; k], vec![false; k], vec![false; k]);
    for u in 0..n {
        let l = label[u];
        if l == usize::MAX {
            continue;
        }
        inner[l] |= touches(spec, region, u, &N4, Place::Hole);
        outer[l] |= touches(spec, region, u, &N4, Place::Exterior);
        ghost[l] |= fk.external[u];
    }
    (0..k).any(|l| inner[l] && outer[l] && !ghost[l])
}

/// Whether a *-connected (8-neighbor) path of sites with `blocked[u]`
/// joins the hole side to the exterior side of the annulus.
pub fn star_crossing(spec: &LatticeSpec, region: &Region, blocked: &[bool]) -> bool {
    let n = spec.num_sites();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&u| blocked[u] && touches(spec, region, u, &N8, Place::Hole))
        .collect();
    for &u in &stack {
        seen[u] = true;
    }
    while let Some(u) = stack.pop() {
        if touches(spec, region, u, &N8, Place::Exterior) {
            return true;
        }
        let s = spec.site(u);
        for (dx, dy) in N8 {
            let (x, y) = (s.col as i64 + dx, s.row as i64 + dy);
            if place(spec, region, x, y) != Place::Ring {
                continue;
            }
            let v = spec.index(ghost_ising::Site::new(x as usize, y as usize));
            if blocked[v] && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

/// Sites of the annulus whose cluster (within the annulus) has an open
/// ghost edge.
pub fn ghost_connected_sites(graph: &GhostGraph, fk: &FkConfig, region: &Region) -> Vec<bool> {
    let label = dfs_clusters(graph, fk, region);
    let n = graph.num_sites();
    let k = label.iter().filter(|&&l| l != usize::MAX).max().map_or(0, |m| m + 1);
    let mut ghost = vec![false; k];
    for u in 0..n {
        if label[u] != usize::MAX && fk.external[u] {
            ghost[label[u]] = true;
        }
    }
    (0..n).map(|u| label[u] != usize::MAX && ghost[label[u]]).collect()
}

/// Event G through planar duality: a ghost-connected circuit surrounds the
/// hole iff no *-path of other annulus sites crosses the annulus.
pub fn brute_g(graph: &GhostGraph, fk: &FkConfig, region: &Region) -> bool {
    let spec = graph.spec();
    let good = ghost_connected_sites(graph, fk, region);
    let blocked: Vec<bool> = (0..spec.num_sites())
        .map(|u| region.contains_index(spec, u) && !good[u])
        .collect();
    !star_crossing(spec, region, &blocked)
}

/// Necklace by exhaustive search over subsets of admissible clusters: some
/// set of at most `k` clusters has a union containing a surrounding
/// circuit (checked by duality). `None` when more than `max_admissible`
/// clusters are admissible.
pub fn brute_necklace(
    graph: &GhostGraph,
    fk: &FkConfig,
    region: &Region,
    k: usize,
    min_mass: f64,
    ghost_only: bool,
    max_admissible: usize,
) -> Option<bool> {
    let spec = graph.spec();
    let n = graph.num_sites();
    let label = dfs_clusters(graph, fk, region);
    let nc = label.iter().filter(|&&l| l != usize::MAX).max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; nc];
    let mut ghost = vec![false; nc];
    for u in 0..n {
        if label[u] != usize::MAX {
            size[label[u]] += 1;
            ghost[label[u]] |= fk.external[u];
        }
    }
    let admissible: Vec<usize> = (0..nc)
        .filter(|&c| size[c] as f64 >= min_mass && (!ghost_only || ghost[c]))
        .collect();
    if admissible.len() > max_admissible {
        return None;
    }
    let inside: Vec<bool> = (0..n).map(|u| region.contains_index(spec, u)).collect();
    for mask in 1u32..(1 << admissible.len()) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let mut chosen = vec![false; nc];
        for (i, &c) in admissible.iter().enumerate() {
            chosen[c] = mask >> i & 1 == 1;
        }
        let blocked: Vec<bool> = (0..n)
            .map(|u| inside[u] && !chosen[label[u]])
            .collect();
        if !star_crossing(spec, region, &blocked) {
            return Some(true);
        }
    }
    Some(false)
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Column spins with bit `i` set meaning spin -1 in row `i`.
pub fn spins(s: usize, w: usize) -> Vec<f64> {
    (0..w).map(|i| if s >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Transfer weight written out from the column spins: horizontal bonds in
/// full, vertical bonds and field split evenly between the two columns.
pub fn naive_entry(w: usize, vb: VerticalBoundary, beta: f64, h: f64, s: usize, t: usize) -> f64 {
    let (a, b) = (spins(s, w), spins(t, w));
    let vertical = |c: &[f64]| {
        let mut e: f64 = (0..w.saturating_sub(1)).map(|i| c[i] * c[i + 1]).sum();
        if vb == VerticalBoundary::Periodic && w > 1 {
            e += c[w - 1] * c[0];
        }
        e
    };
    let horizontal: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let field: f64 = a.iter().chain(&b).sum();
    (beta * horizontal + 0.5 * beta * (vertical(&a) + vertical(&b)) + 0.5 * h * field).exp()
}

pub fn naive_matrix(w: usize, vb: VerticalBoundary, beta: f64, h: f64) -> Vec<Vec<f64>> {
    let n = 1 << w;
    (0..n).map(|s| (0..n).map(|t| naive_entry(w, vb, beta, h, s, t)).collect()).collect()
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Top eigenpair by power iteration (all entries are positive).
pub fn power_iteration(m: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = m.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let u = mat_vec(m, &v);
        let norm = dot(&u, &u).sqrt();
        let next: Vec<f64> = u.iter().map(|x| x / norm).collect();
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        lambda = norm;
        if diff < 1e-15 {
            break;
        }
    }
    (lambda, v)
}

/// Probabilities of increasing internal-edge events under a bond
/// distribution: every single edge, every pairwise intersection and union,
/// and every site-to-site connection without the ghost. One cluster pass
/// per configuration.
pub fn increasing_event_probabilities(graph: &GhostGraph, dist: &ghost_ising::exact::ExactDistribution<f64>) -> Vec<f64> {
    let m = graph.num_internal();
    let n = graph.num_sites();
    let mut out = Vec::new();
    for (b, p) in dist.probabilities().into_iter().enumerate() {
        let fk = FkConfig::from_canonical_bits(graph, b as u64);
        let closed = FkConfig {
            internal: fk.internal.clone(),
            external: vec![false; n],
        };
        let d = ghost_ising::find_clusters(graph, &closed).unwrap();
        let mut k = 0;
        let mut add = |hit: bool| {
            if out.len() <= k {
                out.push(0.0);
            }
            if hit {
                out[k] += p;
            }
            k += 1;
        };
        for e in 0..m {
            add(fk.internal[e]);
            for f in e + 1..m {
                add(fk.internal[e] && fk.internal[f]);
                add(fk.internal[e] || fk.internal[f]);
            }
        }
        for x in 0..n {
            for y in x + 1..n {
                add(d.connected(x, y));
            }
        }
    }
    out
}
