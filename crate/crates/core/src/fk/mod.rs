//! FK-ghost clusters and Monte Carlo samplers.

pub mod chain;
pub mod clusters;
pub mod sampler;

pub use chain::*;
pub use clusters::{find_clusters, ClusterDecomposition, UnionFind};
pub use sampler::{
    es_assign_spins, ln_rn_weight, rn_weight, sw_step, tanh_attach_ghost, wolff_step, ChainState, SwKernel,
    WolffKernel,
};
