//! Critical 2D Ising model in a magnetic field, represented through
//! Fortuin–Kasteleyn clusters with a ghost vertex.

pub mod error;
pub mod eigen;
pub mod estimators;
pub mod events;
pub mod exact;
pub mod fk;
pub mod kv;
pub mod lattice;
pub mod runner;
pub mod scalar;
pub mod transfer;

pub use error::{Error, Result};
pub use fk::{find_clusters, ChainState, ClusterDecomposition};
pub use kv::KvBlock;
pub use lattice::{
    boundary_sites, build_graph, Boundary, FkConfig, GhostGraph, LatticeSpec, Rect, Region, RegionKind, Side, Site,
    SpinConfig,
};
pub use scalar::{beta_critical, Scalar};

pub type FieldParams = lattice::FieldParams<f64>;
pub type StripSpec = transfer::StripSpec<f64>;
pub type TransferMatrix = transfer::TransferMatrix<f64>;
pub type Spectrum = transfer::Spectrum<f64>;
pub type ExactDistribution = exact::ExactDistribution<f64>;
pub type EstimatorResult = estimators::EstimatorResult<f64>;
pub type CorrelationProfile = estimators::CorrelationProfile<f64>;
pub type MassFit = estimators::MassFit<f64>;
