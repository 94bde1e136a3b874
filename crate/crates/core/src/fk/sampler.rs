//! Swendsen–Wang with a ghost field, Wolff at zero field, Edwards–Sokal
//! spin assignment and the cluster-level tanh attachment.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::clusters::{find_clusters_with, union_internal, ClusterDecomposition, UnionFind};
use crate::error::{Error, Result};
use crate::lattice::{
    header, pack_bits, read_header, unpack_bits, Boundary, EdgeRef, FieldParams, FkConfig, GhostGraph, LatticeSpec,
    SpinConfig, NO_SITE,
};
use crate::scalar::{ln_cosh, Scalar};

const CHAIN_MAGIC: [u8; 4] = *b"GICK";

/// Bernoulli threshold: `next_u64() < t` has probability `p` up to 2^-64.
/// `u64::MAX` means "always".
pub(crate) fn threshold(p: f64) -> u64 {
    if !(p > 0.0) {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        // 2^64 * p, rounded down; exact for dyadic p
        let t = p * 18_446_744_073_709_551_616.0;
        if t >= 18_446_744_073_709_551_615.0 {
            u64::MAX - 1
        } else {
            t as u64
        }
    }
}

#[inline]
pub(crate) fn bernoulli(rng: &mut impl RngCore, t: u64) -> bool {
    match t {
        0 => false,
        u64::MAX => true,
        _ => rng.next_u64() < t,
    }
}

#[inline]
fn coin(rng: &mut impl RngCore) -> i8 {
    if rng.next_u64() >> 63 == 0 {
        1
    } else {
        -1
    }
}

/// `1 - exp(-2x)`, accurate for small `x`.
pub(crate) fn open_probability(x: f64) -> f64 {
    -(-2.0 * x).exp_m1()
}

/// State of one Markov chain: spins, the bonds of the last update, the
/// sweep counter and the random stream.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub spins: SpinConfig,
    pub bonds: FkConfig,
    pub sweeps: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for ChainState {
    fn eq(&self, other: &Self) -> bool {
        self.spins == other.spins
            && self.bonds == other.bonds
            && self.sweeps == other.sweeps
            && self.rng.get_seed() == other.rng.get_seed()
            && self.rng.get_stream() == other.rng.get_stream()
            && self.rng.get_word_pos() == other.rng.get_word_pos()
    }
}

impl ChainState {
    /// All spins `+1`, all bonds closed, stream seeded from `seed`.
    pub fn new(graph: &GhostGraph, seed: u64) -> Self {
        ChainState {
            spins: SpinConfig::all_plus(graph.num_sites()),
            bonds: FkConfig::closed(graph),
            sweeps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Checks that spins are constant on open clusters and `+1` on every
    /// ghost-attached cluster. Returns the first offending site.
    pub fn consistency_violation(&self, graph: &GhostGraph) -> Option<usize> {
        let d = super::clusters::find_clusters(graph, &self.bonds).ok()?;
        let reps = d.representatives();
        let s = self.spins.as_slice();
        (0..graph.num_sites()).find(|&u| {
            let c = d.label(u);
            s[u] != s[reps[c] as usize] || (d.ghost_flags()[c] && s[u] != 1)
        })
    }

    /// Bit-exact checkpoint: header, sweep count, generator state, packed
    /// spins, packed bonds.
    pub fn to_bytes(&self, graph: &GhostGraph) -> Result<Vec<u8>> {
        self.bonds.check(graph)?;
        if self.spins.len() != graph.num_sites() {
            return Err(Error::SizeMismatch {
                expected: graph.num_sites(),
                got: self.spins.len(),
            });
        }
        let mut out = header(CHAIN_MAGIC, graph.spec());
        out.extend_from_slice(&self.sweeps.to_le_bytes());
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        out.extend(pack_bits(self.spins.as_slice().iter().map(|&s| s > 0)));
        out.extend(pack_bits(self.bonds.canonical_bits(graph).into_iter()));
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(LatticeSpec, ChainState)> {
        let (spec, body) = read_header(CHAIN_MAGIC, bytes)?;
        let graph = crate::lattice::build_graph(spec)?;
        const FIXED: usize = 8 + 32 + 8 + 16;
        if body.len() < FIXED {
            return Err(Error::Decode("truncated checkpoint".into()));
        }
        let sweeps = u64::from_le_bytes(body[0..8].try_into().unwrap());
        let seed: [u8; 32] = body[8..40].try_into().unwrap();
        let stream = u64::from_le_bytes(body[40..48].try_into().unwrap());
        let word_pos = u128::from_le_bytes(body[48..64].try_into().unwrap());
        let n = graph.num_sites();
        let spin_bytes = n.div_ceil(8);
        let rest = &body[FIXED..];
        if rest.len() < spin_bytes {
            return Err(Error::Decode("truncated spins".into()));
        }
        let spins = unpack_bits(&rest[..spin_bytes], n)?;
        let bits = unpack_bits(&rest[spin_bytes..], graph.canonical_edges().len())?;
        let mut bonds = FkConfig::closed(&graph);
        for (e, open) in graph.canonical_edges().iter().zip(bits) {
            match *e {
                EdgeRef::Internal(i) => bonds.internal[i as usize] = open,
                EdgeRef::External(s) => bonds.external[s as usize] = open,
            }
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        let spins = SpinConfig::from_vec(spins.into_iter().map(|b| if b { 1 } else { -1 }).collect())?;
        Ok((
            spec,
            ChainState {
                spins,
                bonds,
                sweeps,
                rng,
            },
        ))
    }
}

/// Reusable Swendsen–Wang update for fixed graph and parameters.
#[derive(Clone, Debug)]
pub struct SwKernel {
    bond: u64,
    ghost: Vec<u64>,
    uf: UnionFind,
}

impl SwKernel {
    pub fn new<T: Scalar>(graph: &GhostGraph, params: &FieldParams<T>) -> Result<Self> {
        params.validate()?;
        let bond = threshold(open_probability(params.beta.as_f64()));
        let ghost = (0..graph.num_sites())
            .map(|u| threshold(open_probability(graph.site_field(params, u).as_f64())))
            .collect();
        Ok(SwKernel {
            bond,
            ghost,
            uf: UnionFind::new(graph.num_sites()),
        })
    }

    /// One full update; returns the cluster decomposition of the new bonds.
    pub fn step(&mut self, graph: &GhostGraph, state: &mut ChainState) -> ClusterDecomposition {
        let ChainState { spins, bonds, rng, .. } = state;
        let s = spins.as_slice();
        let edges = graph.internal_edges();
        for e in graph.canonical_edges() {
            match *e {
                EdgeRef::Internal(i) => {
                    let [u, v] = edges[i as usize];
                    bonds.internal[i as usize] = s[u as usize] == s[v as usize] && bernoulli(rng, self.bond);
                }
                EdgeRef::External(u) => {
                    bonds.external[u as usize] = s[u as usize] > 0 && bernoulli(rng, self.ghost[u as usize]);
                }
            }
        }
        let d = find_clusters_with(graph, bonds, &mut self.uf);
        let values: Vec<i8> = d
            .ghost_flags()
            .iter()
            .map(|&g| if g { 1 } else { coin(rng) })
            .collect();
        let s = spins.as_mut_slice();
        for (u, &l) in d.labels().iter().enumerate() {
            s[u] = values[l as usize];
        }
        state.sweeps += 1;
        debug_assert_eq!(state.consistency_violation(graph), None);
        d
    }
}

/// One Swendsen–Wang update of `state`.
pub fn sw_step<T: Scalar>(state: &mut ChainState, graph: &GhostGraph, params: &FieldParams<T>) -> Result<()> {
    check_state(state, graph)?;
    SwKernel::new(graph, params)?.step(graph, state);
    Ok(())
}

/// Reusable Wolff update at zero field.
#[derive(Clone, Debug)]
pub struct WolffKernel {
    bond: u64,
    stack: Vec<u32>,
    opened: Vec<u32>,
    clean: bool,
}

impl WolffKernel {
    /// `beta` may be zero here (every cluster is then a single site).
    pub fn new<T: Scalar>(graph: &GhostGraph, beta: T, big_h: T) -> Result<Self> {
        if big_h != T::zero() {
            return Err(Error::InvalidParams(format!("Wolff updates need H = 0, got H = {big_h}")));
        }
        if !(beta >= T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be non-negative, got {beta}")));
        }
        match graph.spec().boundary {
            Boundary::Free | Boundary::Periodic | Boundary::Cylinder => {}
            b => {
                return Err(Error::UnsupportedBoundary(format!(
                    "Wolff updates support free, periodic or cylinder boundaries, not {b}"
                )))
            }
        }
        Ok(WolffKernel {
            bond: threshold(open_probability(beta.as_f64())),
            stack: Vec::new(),
            opened: Vec::new(),
            clean: false,
        })
    }

    /// Flips one cluster; returns its size. Afterwards the open bonds are
    /// exactly the bonds that grew the flipped cluster.
    pub fn step(&mut self, graph: &GhostGraph, state: &mut ChainState) -> usize {
        let ChainState { spins, bonds, rng, .. } = state;
        if self.clean {
            for &e in &self.opened {
                bonds.internal[e as usize] = false;
            }
        } else {
            bonds.internal.fill(false);
            bonds.external.fill(false);
            self.clean = true;
        }
        self.opened.clear();
        let n = graph.num_sites();
        let seed = rng.gen_range(0..n);
        let s = spins.as_mut_slice();
        let old = s[seed];
        s[seed] = -old;
        self.stack.push(seed as u32);
        let mut size = 1;
        while let Some(u) = self.stack.pop() {
            let nb = graph.neighbors(u as usize);
            let ne = graph.neighbor_edges(u as usize);
            for k in 0..4 {
                let v = nb[k];
                if v == NO_SITE || s[v as usize] != old {
                    continue;
                }
                if bernoulli(rng, self.bond) {
                    s[v as usize] = -old;
                    bonds.internal[ne[k] as usize] = true;
                    self.opened.push(ne[k]);
                    self.stack.push(v);
                    size += 1;
                }
            }
        }
        state.sweeps += 1;
        size
    }
}

/// One Wolff single-cluster flip. Requires `H = 0`.
pub fn wolff_step<T: Scalar>(state: &mut ChainState, graph: &GhostGraph, beta: T, big_h: T) -> Result<usize> {
    check_state(state, graph)?;
    Ok(WolffKernel::new(graph, beta, big_h)?.step(graph, state))
}

pub(crate) fn check_state(state: &ChainState, graph: &GhostGraph) -> Result<()> {
    state.bonds.check(graph)?;
    if state.spins.len() != graph.num_sites() {
        return Err(Error::SizeMismatch {
            expected: graph.num_sites(),
            got: state.spins.len(),
        });
    }
    Ok(())
}

/// Edwards–Sokal spins given bonds: a fair coin per cluster not attached
/// to the ghost, `+1` on the ghost-attached clusters.
pub fn es_assign_spins(graph: &GhostGraph, fk: &FkConfig, rng: &mut impl RngCore) -> Result<SpinConfig> {
    let d = super::clusters::find_clusters(graph, fk)?;
    let values: Vec<i8> = d.ghost_flags().iter().map(|&g| if g { 1 } else { coin(rng) }).collect();
    SpinConfig::from_vec(d.labels().iter().map(|&l| values[l as usize]).collect())
}

fn internal_clusters(graph: &GhostGraph, internal: &[bool]) -> Result<ClusterDecomposition> {
    if internal.len() != graph.num_internal() {
        return Err(Error::SizeMismatch {
            expected: graph.num_internal(),
            got: internal.len(),
        });
    }
    match graph.spec().boundary {
        Boundary::Free | Boundary::Periodic | Boundary::Cylinder => {}
        b => {
            return Err(Error::UnsupportedBoundary(format!(
                "cluster-level ghost coupling needs a uniform field and no wiring, not {b}"
            )))
        }
    }
    let mut uf = UnionFind::new(graph.num_sites());
    union_internal(graph, internal, &mut uf);
    Ok(ClusterDecomposition::from_union_find(&mut uf, graph.num_sites(), std::iter::empty()))
}

/// Independently attaches each cluster of the internal bonds to the ghost
/// with probability `tanh(H |C|)`. Flags are in canonical cluster order.
pub fn tanh_attach_ghost<T: Scalar>(
    graph: &GhostGraph,
    internal: &[bool],
    params: &FieldParams<T>,
    rng: &mut impl RngCore,
) -> Result<Vec<bool>> {
    params.validate()?;
    let d = internal_clusters(graph, internal)?;
    let h = params.big_h.as_f64();
    Ok(d
        .sizes()
        .iter()
        .map(|&n| bernoulli(rng, threshold((h * f64::from(n)).tanh())))
        .collect())
}

/// `ln ∏_C cosh(H |C|)` over the clusters of the internal bonds.
pub fn ln_rn_weight<T: Scalar>(graph: &GhostGraph, internal: &[bool], params: &FieldParams<T>) -> Result<T> {
    params.validate()?;
    let d = internal_clusters(graph, internal)?;
    Ok(d
        .sizes()
        .iter()
        .map(|&n| ln_cosh(params.big_h * T::of(f64::from(n))))
        .sum())
}

/// `∏_C cosh(H |C|)`: the unnormalized density of the field-`H` internal
/// bond law with respect to the zero-field one. Accumulated in log space;
/// overflows to infinity only if the result itself is not representable.
pub fn rn_weight<T: Scalar>(graph: &GhostGraph, internal: &[bool], params: &FieldParams<T>) -> Result<T> {
    Ok(ln_rn_weight(graph, internal, params)?.exp())
}
