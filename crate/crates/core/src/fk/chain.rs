//! Seeded Markov chains with burn-in, thinning and scalar observables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::clusters::ClusterDecomposition;
use super::sampler::{ChainState, SwKernel, WolffKernel};
use crate::error::{Error, Result};
use crate::estimators::stats::autocorrelation;
use crate::lattice::{FieldParams, GhostGraph, LatticeSpec, Site};
use crate::scalar::Scalar;

/// Sweeps in the pilot run that sizes an automatic burn-in.
pub const PILOT_SWEEPS: u64 = 200;
/// Automatic burn-in is this many energy autocorrelation times.
pub const BURN_IN_TAUS: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    SwendsenWang,
    /// Single-cluster updates at `H = 0`; one "sweep" is one cluster flip.
    Wolff,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::SwendsenWang => "sw",
            Algorithm::Wolff => "wolff",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sw" | "swendsen-wang" => Ok(Algorithm::SwendsenWang),
            "wolff" => Ok(Algorithm::Wolff),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BurnIn {
    Fixed(u64),
    /// `max(PILOT_SWEEPS, ceil(20 tau_E))` from a pilot run on the energy.
    Auto,
}

impl fmt::Display for BurnIn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BurnIn::Fixed(n) => write!(f, "{n}"),
            BurnIn::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for BurnIn {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BurnIn::Auto);
        }
        s.parse()
            .map(BurnIn::Fixed)
            .map_err(|_| Error::Config(format!("burn-in must be 'auto' or an integer, got '{s}'")))
    }
}

/// Total sweeps (burn-in included), burn-in, thinning and update rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub sweeps: u64,
    pub burn_in: BurnIn,
    pub thin: u64,
    pub algorithm: Algorithm,
}

impl Schedule {
    pub fn sw(sweeps: u64, burn_in: u64, thin: u64) -> Self {
        Schedule {
            sweeps,
            burn_in: BurnIn::Fixed(burn_in),
            thin,
            algorithm: Algorithm::SwendsenWang,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin < 1 {
            return Err(Error::InvalidParams("thin must be at least 1".into()));
        }
        if let BurnIn::Fixed(b) = self.burn_in {
            if self.sweeps <= b {
                return Err(Error::InvalidParams(format!(
                    "sweeps ({}) must exceed burn-in ({b})",
                    self.sweeps
                )));
            }
        }
        Ok(())
    }
}

/// Scalar quantities recorded along a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// Mean spin.
    Magnetization,
    /// `-(1/n) sum over internal edges of s_u s_v`.
    Energy,
    Spin(usize),
    SpinProduct(usize, usize),
    /// Indicator that two sites are joined in the graph with the ghost:
    /// same cluster, or both clusters attached to the ghost.
    Connected(usize, usize),
    /// Indicator that a site's cluster has an open ghost edge.
    GhostConnected(usize),
    /// Number of clusters not attached to the ghost.
    FreeClusters,
}

impl Observable {
    pub fn needs_bonds(&self) -> bool {
        matches!(
            self,
            Observable::Connected(..) | Observable::GhostConnected(_) | Observable::FreeClusters
        )
    }

    fn sites(&self) -> Vec<usize> {
        match *self {
            Observable::Spin(x) | Observable::GhostConnected(x) => vec![x],
            Observable::SpinProduct(x, y) | Observable::Connected(x, y) => vec![x, y],
            _ => Vec::new(),
        }
    }

    /// Canonical name, with sites written as `col.row`.
    pub fn name(&self, spec: &LatticeSpec) -> String {
        let s = |i: usize| {
            let Site { col, row } = spec.site(i);
            format!("{col}.{row}")
        };
        match *self {
            Observable::Magnetization => "magnetization".into(),
            Observable::Energy => "energy".into(),
            Observable::Spin(x) => format!("spin:{}", s(x)),
            Observable::SpinProduct(x, y) => format!("spin_product:{}:{}", s(x), s(y)),
            Observable::Connected(x, y) => format!("connected:{}:{}", s(x), s(y)),
            Observable::GhostConnected(x) => format!("ghost:{}", s(x)),
            Observable::FreeClusters => "free_clusters".into(),
        }
    }

    /// Inverse of [`Observable::name`].
    pub fn parse(text: &str, spec: &LatticeSpec) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let site = |p: &str| -> Result<usize> {
            let (c, r) = p
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("site '{p}' must be col.row")))?;
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad site coordinate '{v}'")))
            };
            spec.check_site(Site::new(parse(c)?, parse(r)?))
        };
        let obs = match parts.as_slice() {
            ["magnetization"] => Observable::Magnetization,
            ["energy"] => Observable::Energy,
            ["free_clusters"] => Observable::FreeClusters,
            ["spin", x] => Observable::Spin(site(x)?),
            ["ghost", x] => Observable::GhostConnected(site(x)?),
            ["spin_product", x, y] => Observable::SpinProduct(site(x)?, site(y)?),
            ["connected", x, y] => Observable::Connected(site(x)?, site(y)?),
            _ => return Err(Error::Config(format!("unknown observable '{text}'"))),
        };
        Ok(obs)
    }

    pub fn evaluate<T: Scalar>(&self, graph: &GhostGraph, state: &ChainState, clusters: Option<&ClusterDecomposition>) -> T {
        let s = state.spins.as_slice();
        let n = T::of_usize(graph.num_sites());
        let ind = |b: bool| if b { T::one() } else { T::zero() };
        match *self {
            Observable::Magnetization => T::of(state.spins.magnetization() as f64) / n,
            Observable::Energy => {
                let sum: i64 = graph
                    .internal_edges()
                    .iter()
                    .map(|&[u, v]| i64::from(s[u as usize] * s[v as usize]))
                    .sum();
                -T::of(sum as f64) / n
            }
            Observable::Spin(x) => T::of(f64::from(s[x])),
            Observable::SpinProduct(x, y) => T::of(f64::from(s[x] * s[y])),
            Observable::Connected(x, y) => ind(clusters.expect("bond observable").connected(x, y)),
            Observable::GhostConnected(x) => ind(clusters.expect("bond observable").is_ghost_connected(x)),
            Observable::FreeClusters => T::of_usize(clusters.expect("bond observable").non_ghost_count()),
        }
    }
}

/// Recorded observable columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput<T> {
    pub names: Vec<String>,
    pub sweeps: Vec<u64>,
    /// One column per observable, aligned with `sweeps`.
    pub columns: Vec<Vec<T>>,
    pub burn_in: u64,
    /// Energy autocorrelation time of the pilot run, when burn-in was automatic.
    pub pilot_tau: Option<T>,
    pub final_state: ChainState,
}

impl<T: Scalar> ChainOutput<T> {
    /// `(sweep, name, value)` in sweep order, observables in request order.
    pub fn records(&self) -> impl Iterator<Item = (u64, &str, T)> + '_ {
        self.sweeps.iter().enumerate().flat_map(move |(i, &sw)| {
            self.names
                .iter()
                .zip(&self.columns)
                .map(move |(name, col)| (sw, name.as_str(), col[i]))
        })
    }

    pub fn column(&self, name: &str) -> Option<&[T]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }
}

enum Kernel {
    Sw(SwKernel),
    Wolff(WolffKernel),
}

/// Drives one chain and hands each retained state to `measure`.
///
/// The cluster decomposition is available for Swendsen–Wang updates; for
/// Wolff updates it is `None`. Returns the final state, the resolved
/// burn-in and the pilot autocorrelation time (automatic burn-in only).
pub fn run_chain<T, F>(
    graph: &GhostGraph,
    params: &FieldParams<T>,
    schedule: &Schedule,
    seed: u64,
    measure: F,
) -> Result<(ChainState, u64, Option<T>)>
where
    T: Scalar,
    F: FnMut(&ChainState, Option<&ClusterDecomposition>),
{
    run_chain_from(graph, params, schedule, ChainState::new(graph, seed), measure)
}

/// [`run_chain`] continuing from an existing state, e.g. a checkpoint.
/// The schedule (including burn-in) counts sweeps from `state`.
pub fn run_chain_from<T, F>(
    graph: &GhostGraph,
    params: &FieldParams<T>,
    schedule: &Schedule,
    mut state: ChainState,
    mut measure: F,
) -> Result<(ChainState, u64, Option<T>)>
where
    T: Scalar,
    F: FnMut(&ChainState, Option<&ClusterDecomposition>),
{
    super::sampler::check_state(&state, graph)?;
    if let Some(site) = state.consistency_violation(graph) {
        return Err(Error::InvalidParams(format!("chain state is inconsistent at site {site}")));
    }
    schedule.validate()?;
    params.validate()?;
    let mut kernel = match schedule.algorithm {
        Algorithm::SwendsenWang => Kernel::Sw(SwKernel::new(graph, params)?),
        Algorithm::Wolff => Kernel::Wolff(WolffKernel::new(graph, params.beta, params.big_h)?),
    };
    let mut step = |state: &mut ChainState| match &mut kernel {
        Kernel::Sw(k) => Some(k.step(graph, state)),
        Kernel::Wolff(k) => {
            k.step(graph, state);
            None
        }
    };

    let (burn_in, pilot_tau) = match schedule.burn_in {
        BurnIn::Fixed(b) => {
            for _ in 0..b {
                step(&mut state);
            }
            (b, None)
        }
        BurnIn::Auto => {
            let mut energy = Vec::with_capacity(PILOT_SWEEPS as usize);
            for _ in 0..PILOT_SWEEPS {
                step(&mut state);
                energy.push(Observable::Energy.evaluate::<T>(graph, &state, None));
            }
            let tau = autocorrelation(&energy)?.tau.max(T::of(0.5));
            let b = ((T::of(BURN_IN_TAUS) * tau).ceil().as_f64() as u64).max(PILOT_SWEEPS);
            if b >= schedule.sweeps {
                return Err(Error::InvalidParams(format!(
                    "automatic burn-in of {b} sweeps leaves nothing of {} sweeps",
                    schedule.sweeps
                )));
            }
            for _ in PILOT_SWEEPS..b {
                step(&mut state);
            }
            (b, Some(tau))
        }
    };

    for k in 1..=schedule.sweeps - burn_in {
        let d = step(&mut state);
        if k % schedule.thin == 0 {
            measure(&state, d.as_ref());
        }
    }
    Ok((state, burn_in, pilot_tau))
}

/// Runs a chain from `seed` and records `observables` every `thin` sweeps
/// after burn-in.
pub fn sample_chain<T: Scalar>(
    graph: &GhostGraph,
    params: &FieldParams<T>,
    schedule: &Schedule,
    seed: u64,
    observables: &[Observable],
) -> Result<ChainOutput<T>> {
    let n = graph.num_sites();
    for o in observables {
        if o.sites().iter().any(|&s| s >= n) {
            return Err(Error::InvalidParams(format!("observable {o:?} refers to a missing site")));
        }
        if o.needs_bonds() && schedule.algorithm == Algorithm::Wolff {
            return Err(Error::InvalidParams(format!(
                "observable {} needs full bond configurations, which Wolff updates do not produce",
                o.name(graph.spec())
            )));
        }
    }
    let mut sweeps = Vec::new();
    let mut columns = vec![Vec::new(); observables.len()];
    let (final_state, burn_in, pilot_tau) = run_chain(graph, params, schedule, seed, |state, d| {
        sweeps.push(state.sweeps);
        for (col, o) in columns.iter_mut().zip(observables) {
            col.push(o.evaluate(graph, state, d));
        }
    })?;
    if observables.is_empty() {
        sweeps.clear();
    }
    Ok(ChainOutput {
        names: observables.iter().map(|o| o.name(graph.spec())).collect(),
        sweeps,
        columns,
        burn_in,
        pilot_tau,
        final_state,
    })
}
