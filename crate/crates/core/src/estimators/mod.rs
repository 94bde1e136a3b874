//! Statistical layer: error bars, two-point functions, mass and exponent fits.

pub mod field;
pub mod fit;
pub mod profile;
pub mod stats;

pub use field::{block_field_cov, scaling_check, smeared_field, ScalingComparison, ScalingReport, ScalingRun, TestBox};
pub use fit::{
    exponent_fit, fit_mass, fit_mass_jackknife, fit_mass_with_prefactor, linear_fit, magnetization_exponent,
    ExponentFit, FitWindow, LinearFit, MassFit,
};
pub use profile::{
    correlation_profile, truncated_two_point_fk, truncated_two_point_spin, CorrelationProfile, Direction,
    ProfileAccumulator,
};
pub use stats::{autocorrelation, jackknife, mean_estimate, AutocorrFlag, AutocorrTime, EstimatorResult};
