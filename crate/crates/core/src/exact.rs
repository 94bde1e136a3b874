//! Brute-force enumeration of the Ising, FK-ghost and Edwards–Sokal joint
//! measures on tiny graphs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::clusters::{find_clusters_with, union_internal, ClusterDecomposition, UnionFind};
use crate::lattice::{Boundary, EdgeRef, FieldParams, FkConfig, GhostGraph, LatticeSpec, Site};
use crate::scalar::{ln_cosh, pairwise_sum, Scalar};

pub const MAX_ISING_SITES: usize = 20;
pub const MAX_FK_EDGES: usize = 24;
pub const MAX_JOINT_BITS: usize = 24;

const CHUNK: u64 = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigKind {
    /// Bit `k` is the spin of site `k` (`1` for `+1`).
    Spins,
    /// Bit `k` is the state of the `k`-th canonical edge.
    Bonds,
    /// Spin bits in the low `n` bits, canonical bond bits above them.
    Joint,
}

/// Unnormalized weights of every configuration of a tiny graph.
///
/// Weights are stored divided by `exp(log_shift)` so the largest is of
/// order one. Configurations forbidden by a constraint (an open ghost edge
/// at zero field, an Edwards–Sokal pair with a spin jump inside a cluster,
/// unequal spins on a wired boundary) have weight exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution<T> {
    kind: ConfigKind,
    bits: usize,
    spin_bits: usize,
    weights: Vec<T>,
    log_shift: T,
    partition: T,
}

impl<T: Scalar> ExactDistribution<T> {
    pub fn kind(&self) -> ConfigKind {
        self.kind
    }

    /// Degrees of freedom; the support has `2^bits` configurations.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Shifted weights indexed by configuration bits.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn log_shift(&self) -> T {
        self.log_shift
    }

    /// Sum of the shifted weights.
    pub fn partition(&self) -> T {
        self.partition
    }

    /// Logarithm of the unshifted partition function.
    pub fn log_partition(&self) -> T {
        self.partition.ln() + self.log_shift
    }

    pub fn probability(&self, config: u64) -> T {
        self.weights[config as usize] / self.partition
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.weights.iter().map(|&w| w / self.partition).collect()
    }

    /// `E[f(config)]`, summed in a fixed order.
    pub fn expectation<F>(&self, f: F) -> T
    where
        F: Fn(u64) -> T + Sync,
    {
        let w = &self.weights;
        let z = self.partition;
        det_sum(w.len() as u64, |i| {
            let wi = w[i as usize];
            if wi == T::zero() {
                T::zero()
            } else {
                wi * f(i)
            }
        }) / z
    }

    pub fn event_probability<F>(&self, event: F) -> T
    where
        F: Fn(u64) -> bool + Sync,
    {
        self.expectation(|i| if event(i) { T::one() } else { T::zero() })
    }

    /// Spin marginal of a joint distribution, as probabilities.
    pub fn spin_marginal(&self) -> Result<Vec<T>> {
        self.require(ConfigKind::Joint)?;
        let n = self.spin_bits;
        let mut out = vec![T::zero(); 1 << n];
        for (s, o) in out.iter_mut().enumerate() {
            let col: Vec<T> = (0..1usize << (self.bits - n)).map(|b| self.weights[(b << n) | s]).collect();
            *o = pairwise_sum(&col) / self.partition;
        }
        Ok(out)
    }

    /// Bond marginal of a joint distribution, as probabilities.
    pub fn bond_marginal(&self) -> Result<Vec<T>> {
        self.require(ConfigKind::Joint)?;
        let n = self.spin_bits;
        Ok(self
            .weights
            .chunks(1 << n)
            .map(|c| pairwise_sum(c) / self.partition)
            .collect())
    }

    fn require(&self, kind: ConfigKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidParams(format!("expected a {kind:?} distribution, got {:?}", self.kind)));
        }
        Ok(())
    }

    fn from_log_weights(kind: ConfigKind, bits: usize, spin_bits: usize, log_shift: T, f: impl Fn(u64) -> T + Sync) -> Self {
        let count = 1u64 << bits;
        let chunks: Vec<Vec<T>> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                (c * CHUNK..((c + 1) * CHUNK).min(count))
                    .map(|i| (f(i) - log_shift).exp())
                    .collect()
            })
            .collect();
        let weights: Vec<T> = chunks.into_iter().flatten().collect();
        let partition = pairwise_sum(&weights);
        ExactDistribution {
            kind,
            bits,
            spin_bits,
            weights,
            log_shift,
            partition,
        }
    }
}

/// Sum of `f(i)` for `i < count`: fixed-size chunks evaluated in parallel,
/// then combined pairwise, so the result does not depend on thread count.
pub(crate) fn det_sum<T: Scalar>(count: u64, f: impl Fn(u64) -> T + Sync) -> T {
    let parts: Vec<T> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let v: Vec<T> = (c * CHUNK..((c + 1) * CHUNK).min(count)).map(&f).collect();
            pairwise_sum(&v)
        })
        .collect();
    pairwise_sum(&parts)
}

/// Like [`det_sum`] over vectors of accumulators, with a cluster
/// decomposition scratch space per chunk.
fn det_sum_vec<T: Scalar>(count: u64, len: usize, n: usize, f: impl Fn(u64, &mut UnionFind, &mut [T]) + Sync) -> Vec<T> {
    let parts: Vec<Vec<T>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut uf = UnionFind::new(n);
            let mut acc = vec![T::zero(); len];
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                f(i, &mut uf, &mut acc);
            }
            acc
        })
        .collect();
    (0..len)
        .map(|k| pairwise_sum(&parts.iter().map(|p| p[k]).collect::<Vec<_>>()))
        .collect()
}

fn spin(bits: u64, site: usize) -> i32 {
    if bits >> site & 1 == 1 {
        1
    } else {
        -1
    }
}

fn ising_log_weight<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>, fields: &[T], bits: u64) -> T {
    let wired = graph.wired_sites();
    if let Some(&first) = wired.first() {
        let s0 = spin(bits, first as usize);
        if wired.iter().any(|&u| spin(bits, u as usize) != s0) {
            return T::neg_infinity();
        }
    }
    let bond: i32 = graph
        .internal_edges()
        .iter()
        .map(|&[u, v]| spin(bits, u as usize) * spin(bits, v as usize))
        .sum();
    let mut field = T::zero();
    for (u, &h) in fields.iter().enumerate() {
        field += h * T::of(f64::from(spin(bits, u)));
    }
    params.beta * T::of(f64::from(bond)) + field
}

fn site_fields<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>) -> Vec<T> {
    (0..graph.num_sites()).map(|u| graph.site_field(params, u)).collect()
}

/// Ising measure `exp(beta sum s_u s_v + sum_u H_u s_u)` over all spin
/// configurations, where `H_u` includes the plus-boundary bonds.
pub fn enumerate_ising<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>) -> Result<ExactDistribution<T>> {
    params.validate()?;
    let n = graph.num_sites();
    if n > MAX_ISING_SITES {
        return Err(Error::EnumerationTooLarge {
            what: "sites",
            count: n,
            limit: MAX_ISING_SITES,
        });
    }
    let fields = site_fields(graph, params);
    // all-plus maximizes the weight for non-negative fields
    let shift = ising_log_weight(graph, params, &fields, (1u64 << n) - 1);
    Ok(ExactDistribution::from_log_weights(ConfigKind::Spins, n, n, shift, |b| {
        ising_log_weight(graph, params, &fields, b)
    }))
}

/// Per-edge log factors of the FK-ghost weight.
struct FkFactors<T> {
    bond_open: T,
    bond_closed: T,
    ghost_open: Vec<T>,
    ghost_closed: Vec<T>,
}

impl<T: Scalar> FkFactors<T> {
    fn new(graph: &GhostGraph, params: &FieldParams<T>) -> Self {
        let two = T::of(2.0);
        let ghost = site_fields(graph, params);
        FkFactors {
            bond_open: (-(-two * params.beta).exp_m1()).ln(),
            bond_closed: -two * params.beta,
            ghost_open: ghost.iter().map(|&h| (-(-two * h).exp_m1()).ln()).collect(),
            ghost_closed: ghost.iter().map(|&h| -two * h).collect(),
        }
    }

    fn edges(&self, fk: &FkConfig) -> T {
        let mut s = T::zero();
        for &o in &fk.internal {
            s += if o { self.bond_open } else { self.bond_closed };
        }
        for (u, &o) in fk.external.iter().enumerate() {
            s += if o { self.ghost_open[u] } else { self.ghost_closed[u] };
        }
        s
    }

    fn upper_bound(&self, n: usize, internal: usize) -> T {
        let mut s = T::of_usize(n) * T::of(2.0).ln() + T::of_usize(internal) * self.bond_open.max(self.bond_closed);
        for (o, c) in self.ghost_open.iter().zip(&self.ghost_closed) {
            s += o.max(*c);
        }
        s
    }
}

fn check_fk_size(graph: &GhostGraph) -> Result<usize> {
    let e = graph.canonical_edges().len();
    if e > MAX_FK_EDGES {
        return Err(Error::EnumerationTooLarge {
            what: "edges",
            count: e,
            limit: MAX_FK_EDGES,
        });
    }
    Ok(e)
}

/// Canonical bit of every internal edge, and the canonical index of every
/// ghost pattern `g` (bit `s` set when the external edge of site `s` is open).
struct BondLayout {
    internal_bit: Vec<u64>,
    ghost_index: Vec<u64>,
}

impl BondLayout {
    fn new(graph: &GhostGraph) -> Self {
        let n = graph.num_sites();
        let mut internal_bit = vec![0u64; graph.num_internal()];
        let mut external_bit = vec![0u64; n];
        for (k, e) in graph.canonical_edges().iter().enumerate() {
            match *e {
                EdgeRef::Internal(i) => internal_bit[i as usize] = 1 << k,
                EdgeRef::External(s) => external_bit[s as usize] = 1 << k,
            }
        }
        let ghost_index = (0..1u64 << n)
            .map(|g| (0..n).filter(|&s| g >> s & 1 == 1).fold(0, |acc, s| acc | external_bit[s]))
            .collect();
        BondLayout {
            internal_bit,
            ghost_index,
        }
    }

    /// Canonical index of the internal configuration `omega` with all ghost
    /// edges closed.
    fn base(&self, omega: u64) -> u64 {
        self.internal_bit
            .iter()
            .enumerate()
            .filter(|(i, _)| omega >> i & 1 == 1)
            .fold(0, |acc, (_, &b)| acc | b)
    }
}

/// Site masks of the clusters of the internal configuration `omega`
/// (bit `i` = internal edge `i`), wiring included.
fn cluster_masks(graph: &GhostGraph, omega: u64, uf: &mut UnionFind) -> Vec<u64> {
    let internal: Vec<bool> = (0..graph.num_internal()).map(|i| omega >> i & 1 == 1).collect();
    uf.reset();
    union_internal(graph, &internal, uf);
    let n = graph.num_sites();
    let mut by_root = vec![0u64; n];
    for s in 0..n {
        by_root[uf.find(s as u32) as usize] |= 1 << s;
    }
    by_root.retain(|&m| m != 0);
    by_root
}

/// FK-ghost measure `2^K prod_e p_e^w (1-p_e)^(1-w)` over all bond
/// configurations, with `K` the number of clusters not attached to the
/// ghost and `p = 1 - exp(-2 beta)` or `1 - exp(-2 H_u)`.
pub fn enumerate_fk_ghost<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>) -> Result<ExactDistribution<T>> {
    params.validate()?;
    let e = check_fk_size(graph)?;
    let factors = FkFactors::new(graph, params);
    let shift = factors.upper_bound(graph.num_sites(), graph.num_internal());
    let ln2 = T::of(2.0).ln();
    let (n, m) = (graph.num_sites(), graph.num_internal());
    let layout = BondLayout::new(graph);
    let ghost_log: Vec<T> = (0..1u64 << n)
        .map(|g| {
            (0..n)
                .map(|s| if g >> s & 1 == 1 { factors.ghost_open[s] } else { factors.ghost_closed[s] })
                .sum()
        })
        .collect();
    // clusters once per internal configuration, then every ghost pattern
    let blocks: Vec<Vec<T>> = (0..1u64 << m)
        .into_par_iter()
        .map_init(
            || UnionFind::new(n),
            |uf, omega| {
                let masks = cluster_masks(graph, omega, uf);
                let open = omega.count_ones() as usize;
                let internal_log = T::of_usize(open) * factors.bond_open + T::of_usize(m - open) * factors.bond_closed;
                (0..1u64 << n)
                    .map(|g| {
                        let free = masks.iter().filter(|&&c| c & g == 0).count();
                        (T::of_usize(free) * ln2 + internal_log + ghost_log[g as usize] - shift).exp()
                    })
                    .collect()
            },
        )
        .collect();
    let mut weights = vec![T::zero(); 1 << e];
    for (omega, block) in blocks.into_iter().enumerate() {
        let base = layout.base(omega as u64);
        for (g, w) in block.into_iter().enumerate() {
            weights[(base | layout.ghost_index[g]) as usize] = w;
        }
    }
    let partition = pairwise_sum(&weights);
    Ok(ExactDistribution {
        kind: ConfigKind::Bonds,
        bits: e,
        spin_bits: 0,
        weights,
        log_shift: shift,
        partition,
    })
}

fn es_consistent(d: &ClusterDecomposition, spins: u64) -> bool {
    let reps = d.representatives();
    d.labels().iter().enumerate().all(|(u, &l)| {
        let s = spin(spins, u);
        s == spin(spins, reps[l as usize] as usize) && (!d.ghost_flags()[l as usize] || s == 1)
    })
}

/// Edwards–Sokal joint law: FK weight times `2^-K` times the indicator
/// that spins are constant on clusters and `+1` on ghost-attached ones.
pub fn enumerate_joint_es<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>) -> Result<ExactDistribution<T>> {
    params.validate()?;
    let n = graph.num_sites();
    let e = graph.canonical_edges().len();
    if n + e > MAX_JOINT_BITS {
        return Err(Error::EnumerationTooLarge {
            what: "spin and edge bits",
            count: n + e,
            limit: MAX_JOINT_BITS,
        });
    }
    let factors = FkFactors::new(graph, params);
    let shift = factors.upper_bound(0, graph.num_internal());
    Ok(ExactDistribution::from_log_weights(ConfigKind::Joint, n + e, n, shift, |b| {
        let spins = b & ((1 << n) - 1);
        let fk = FkConfig::from_canonical_bits(graph, b >> n);
        let mut uf = UnionFind::new(n);
        let d = find_clusters_with(graph, &fk, &mut uf);
        if es_consistent(&d, spins) {
            factors.edges(&fk)
        } else {
            T::neg_infinity()
        }
    }))
}

fn site_index(graph: &GhostGraph, site: Site) -> Result<usize> {
    graph.spec().check_site(site)
}

/// `<s_x>` under the exact Ising measure.
pub fn exact_magnetization<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>, x: Site) -> Result<T> {
    let x = site_index(graph, x)?;
    let d = enumerate_ising(graph, params)?;
    Ok(d.expectation(|b| T::of(f64::from(spin(b, x)))))
}

/// `<s_x s_y> - <s_x><s_y>` under the exact Ising measure.
pub fn exact_truncated_two_point<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>, x: Site, y: Site) -> Result<T> {
    let (x, y) = (site_index(graph, x)?, site_index(graph, y)?);
    let d = enumerate_ising(graph, params)?;
    Ok(truncated_from(&d, x, y))
}

fn truncated_from<T: Scalar>(d: &ExactDistribution<T>, x: usize, y: usize) -> T {
    let mx = d.expectation(|b| T::of(f64::from(spin(b, x))));
    let my = d.expectation(|b| T::of(f64::from(spin(b, y))));
    d.expectation(|b| (T::of(f64::from(spin(b, x))) - mx) * (T::of(f64::from(spin(b, y))) - my))
}

/// Both sides of the Edwards–Sokal identity: the exact truncated
/// two-point function and `P(x<->y) - P(x<->g) P(y<->g)` under the FK-ghost
/// measure, connections taken in the graph that includes the ghost.
pub fn verify_es_identity<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>, x: Site, y: Site) -> Result<(T, T)> {
    let (xi, yi) = (site_index(graph, x)?, site_index(graph, y)?);
    let lhs = exact_truncated_two_point(graph, params, x, y)?;
    let fk = enumerate_fk_ghost(graph, params)?;
    let n = graph.num_sites();
    let acc = det_sum_vec::<T>(fk.len() as u64, 3, n, |b, uf, acc| {
        let w = fk.weights[b as usize];
        if w == T::zero() {
            return;
        }
        let d = find_clusters_with(graph, &FkConfig::from_canonical_bits(graph, b), uf);
        if d.connected(xi, yi) {
            acc[0] += w;
        }
        if d.is_ghost_connected(xi) {
            acc[1] += w;
        }
        if d.is_ghost_connected(yi) {
            acc[2] += w;
        }
    });
    let z = fk.partition;
    let rhs = acc[0] / z - (acc[1] / z) * (acc[2] / z);
    Ok((lhs, rhs))
}

/// Largest `|lhs - rhs|` of the Edwards–Sokal identity over all site pairs,
/// from one Ising and one FK enumeration.
pub fn es_identity_max_discrepancy<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>) -> Result<T> {
    let n = graph.num_sites();
    let ising = enumerate_ising(graph, params)?;
    let fk = enumerate_fk_ghost(graph, params)?;
    let layout = BondLayout::new(graph);
    // accumulators: weight per set of ghost-attached sites (2^n entries),
    // then per pair the weight of sharing a cluster not attached to the ghost
    let acc = det_sum_vec::<T>(1u64 << graph.num_internal(), (1 << n) + n * n, n, |omega, uf, acc| {
        let masks = cluster_masks(graph, omega, uf);
        let base = layout.base(omega);
        let mut detached = vec![T::zero(); masks.len()];
        for (g, &idx) in layout.ghost_index.iter().enumerate() {
            let w = fk.weights[(base | idx) as usize];
            if w == T::zero() {
                continue;
            }
            let mut attached = 0u64;
            for (c, &mask) in masks.iter().enumerate() {
                if mask & g as u64 != 0 {
                    attached |= mask;
                } else {
                    detached[c] += w;
                }
            }
            acc[attached as usize] += w;
        }
        for (&mask, &w) in masks.iter().zip(&detached) {
            for x in (0..n).filter(|&x| mask >> x & 1 == 1) {
                for y in (0..n).filter(|&y| mask >> y & 1 == 1) {
                    acc[(1 << n) + x * n + y] += w;
                }
            }
        }
    });
    let z = fk.partition;
    let mut ghost = vec![T::zero(); n];
    let mut conn: Vec<T> = acc[1 << n..].to_vec();
    for (set, &w) in acc[..1 << n].iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        for x in (0..n).filter(|&x| set >> x & 1 == 1) {
            ghost[x] += w;
            for y in (0..n).filter(|&y| set >> y & 1 == 1) {
                conn[x * n + y] += w;
            }
        }
    }
    let mut worst = T::zero();
    for x in 0..n {
        for y in 0..n {
            let rhs = conn[x * n + y] / z - (ghost[x] / z) * (ghost[y] / z);
            worst = worst.max((truncated_from(&ising, x, y) - rhs).abs());
        }
    }
    Ok(worst)
}

/// Checks the cluster-level description of the field on a free-boundary
/// graph against direct enumeration, returning the largest discrepancy
/// among:
/// - the internal-bond marginal versus the zero-field law reweighted by
///   `prod_C cosh(H |C|)` and renormalized;
/// - `P(C <-> g | internal bonds)` versus `tanh(H |C|)` for every cluster;
/// - the joint attachment law of all clusters versus the product of the
///   single-cluster probabilities.
pub fn verify_rn_coupling<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>) -> Result<T> {
    if graph.spec().boundary != Boundary::Free {
        return Err(Error::UnsupportedBoundary(format!(
            "the cluster reweighting identity is checked for free boundaries only, not {}",
            graph.spec().boundary
        )));
    }
    let field = enumerate_fk_ghost(graph, params)?;
    let zero = enumerate_fk_ghost(graph, &FieldParams::new(params.beta, T::zero())?)?;
    let n = graph.num_sites();
    let m = graph.num_internal();
    // canonical bit position of every internal and external edge
    let mut pos_int = vec![0usize; m];
    let mut pos_ext = vec![0usize; n];
    for (k, e) in graph.canonical_edges().iter().enumerate() {
        match *e {
            EdgeRef::Internal(i) => pos_int[i as usize] = k,
            EdgeRef::External(s) => pos_ext[s as usize] = k,
        }
    }
    let h = params.big_h;
    let results: Vec<(T, T, T)> = (0..1u64 << m)
        .into_par_iter()
        .map(|omega| {
            let mut base = 0u64;
            let mut internal = vec![false; m];
            for (i, slot) in internal.iter_mut().enumerate() {
                if omega >> i & 1 == 1 {
                    *slot = true;
                    base |= 1 << pos_int[i];
                }
            }
            let fk = FkConfig {
                internal,
                external: vec![false; n],
            };
            let mut uf = UnionFind::new(n);
            let d = find_clusters_with(graph, &fk, &mut uf);
            let k = d.num_clusters();
            // weight of every attachment pattern over clusters
            let mut pattern = vec![T::zero(); 1 << k];
            let mut ghost_weights = Vec::with_capacity(1 << n);
            for g in 0..1u64 << n {
                let mut idx = base;
                let mut mask = 0usize;
                for s in 0..n {
                    if g >> s & 1 == 1 {
                        idx |= 1 << pos_ext[s];
                        mask |= 1 << d.label(s);
                    }
                }
                let w = field.weights[idx as usize];
                pattern[mask] += w;
                ghost_weights.push(w);
            }
            let marginal = pairwise_sum(&ghost_weights);
            let ln_rn: T = d.sizes().iter().map(|&c| ln_cosh(h * T::of(f64::from(c)))).sum();
            let zero_weight = zero.weights[base as usize];
            (marginal, zero_weight * ln_rn.exp(), {
                // conditional checks
                let mut worst = T::zero();
                if marginal > T::zero() {
                    let tanh: Vec<T> = d.sizes().iter().map(|&c| (h * T::of(f64::from(c))).tanh()).collect();
                    for (mask, &w) in pattern.iter().enumerate() {
                        let p = w / marginal;
                        let mut prod = T::one();
                        for (c, &t) in tanh.iter().enumerate() {
                            prod *= if mask >> c & 1 == 1 { t } else { T::one() - t };
                        }
                        worst = worst.max((p - prod).abs());
                    }
                    for (c, &t) in tanh.iter().enumerate() {
                        let attached: Vec<T> = pattern
                            .iter()
                            .enumerate()
                            .filter(|(mask, _)| mask >> c & 1 == 1)
                            .map(|(_, &w)| w)
                            .collect();
                        worst = worst.max((pairwise_sum(&attached) / marginal - t).abs());
                    }
                }
                worst
            })
        })
        .collect();
    let z_field = pairwise_sum(&results.iter().map(|r| r.0).collect::<Vec<_>>());
    let z_rn = pairwise_sum(&results.iter().map(|r| r.1).collect::<Vec<_>>());
    let mut worst = T::zero();
    for (marginal, reweighted, cond) in results {
        worst = worst.max((marginal / z_field - reweighted / z_rn).abs()).max(cond);
    }
    Ok(worst)
}

/// Graphs small enough for every enumeration here: all fit the FK edge
/// limit, several also the joint limit.
pub fn corpus() -> Vec<LatticeSpec> {
    let mk = |w, h, b| LatticeSpec::new(w, h, b).expect("corpus specs are valid");
    vec![
        mk(1, 1, Boundary::Free),
        mk(1, 2, Boundary::Free),
        mk(1, 3, Boundary::Free),
        mk(2, 2, Boundary::Free),
        mk(2, 3, Boundary::Free),
        mk(2, 4, Boundary::Free),
        mk(3, 3, Boundary::Free),
        mk(2, 5, Boundary::Free),
        mk(2, 2, Boundary::Periodic),
        mk(2, 3, Boundary::Periodic),
        mk(2, 2, Boundary::PlusSpin),
        mk(3, 3, Boundary::PlusSpin),
        mk(2, 3, Boundary::WiredFk),
        mk(3, 3, Boundary::WiredFk),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_graph;

    fn graph(w: usize, h: usize, b: Boundary) -> GhostGraph {
        build_graph(LatticeSpec::new(w, h, b).unwrap()).unwrap()
    }

    #[test]
    fn single_site_closed_forms() {
        let g = graph(1, 1, Boundary::Free);
        let d = enumerate_ising(&g, &FieldParams::<f64>::new(0.7, 0.0).unwrap()).unwrap();
        assert!((d.probability(1) - 0.5).abs() < 1e-15);
        let d = enumerate_ising(&g, &FieldParams::<f64>::new(0.7, 0.5).unwrap()).unwrap();
        let e = 0.5f64.exp();
        assert!((d.probability(1) - e / (e + 1.0 / e)).abs() < 1e-15);
        let fk = enumerate_fk_ghost(&g, &FieldParams::<f64>::new(0.7, 0.5).unwrap()).unwrap();
        assert!((fk.probability(1) - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn zero_field_closes_ghost_edges() {
        let g = graph(2, 2, Boundary::Free);
        let d = enumerate_fk_ghost(&g, &FieldParams::<f64>::critical(0.0).unwrap()).unwrap();
        let p = d.event_probability(|b| FkConfig::from_canonical_bits(&g, b).external.iter().any(|&o| o));
        assert_eq!(p, 0.0);
    }

    #[test]
    fn joint_marginals_match() {
        let g = graph(1, 2, Boundary::Free);
        let p = FieldParams::<f64>::critical(0.2).unwrap();
        let joint = enumerate_joint_es(&g, &p).unwrap();
        let ising = enumerate_ising(&g, &p).unwrap().probabilities();
        let fk = enumerate_fk_ghost(&g, &p).unwrap().probabilities();
        for (a, b) in joint.spin_marginal().unwrap().iter().zip(&ising) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in joint.bond_marginal().unwrap().iter().zip(&fk) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn limits_are_enforced() {
        let big = graph(5, 5, Boundary::Free);
        let p = FieldParams::<f64>::critical(0.1).unwrap();
        assert!(matches!(enumerate_ising(&big, &p), Err(Error::EnumerationTooLarge { .. })));
        assert!(matches!(enumerate_fk_ghost(&big, &p), Err(Error::EnumerationTooLarge { .. })));
        let g = graph(3, 3, Boundary::Free);
        assert!(enumerate_joint_es(&g, &p).is_err());
    }

    #[test]
    fn saturated_field_kills_correlations() {
        let g = graph(2, 2, Boundary::Free);
        let p = FieldParams::<f64>::critical(50.0).unwrap();
        let c = exact_truncated_two_point(&g, &p, Site::new(0, 0), Site::new(1, 1)).unwrap();
        assert!(c.abs() < 1e-8);
    }

    #[test]
    fn wired_boundary_constrains_rim() {
        let g = graph(3, 3, Boundary::WiredFk);
        let d = enumerate_ising(&g, &FieldParams::<f64>::critical(0.1).unwrap()).unwrap();
        let mixed = d.event_probability(|b| spin(b, 0) != spin(b, 8));
        assert_eq!(mixed, 0.0);
    }

    #[test]
    fn out_of_range_sites_are_rejected() {
        let g = graph(2, 2, Boundary::Free);
        let p = FieldParams::<f64>::critical(0.1).unwrap();
        assert!(exact_truncated_two_point(&g, &p, Site::new(2, 0), Site::new(0, 0)).is_err());
    }

    #[test]
    fn rn_coupling_rejects_other_boundaries() {
        let g = graph(2, 2, Boundary::Periodic);
        assert!(verify_rn_coupling(&g, &FieldParams::<f64>::critical(0.1).unwrap()).is_err());
    }
}
