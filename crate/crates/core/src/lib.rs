//! Numerical toolkit for bounded multiplicative functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`funcspec`] describes multiplicative functions symbolically and evaluates
//!   them pointwise by factorization.
//! * [`sieve`] evaluates a spec on `[1, N]` in bulk and caches the table on disk.
//! * [`averages`] computes checkpointed Cesàro and logarithmic averages of
//!   shift products, optionally weighted.
//! * [`pretentious`] computes prime-sum distances and strong-aperiodicity
//!   statistics.
//! * [`dilates`] averages correlations over prime dilates of the shifts.
//! * [`symbolic`] estimates cylinder densities, block complexity and
//!   autocorrelations of finite-valued tables.

pub mod arith;
pub mod averages;
pub mod dilates;
pub mod error;
pub mod funcspec;
pub mod pretentious;
pub mod sieve;
pub mod summation;
pub mod symbolic;

pub use num_complex::Complex64;

pub use averages::{
    arithmetic_progression_average, correlation, harmonic_norm, nit_correlation_oracle,
    CorrelationResult, ShiftFactor, ShiftPattern, WeightSpec,
};
pub use dilates::{
    dilate_identity_residual, prime_dyadic_log_average, primes_in_class, DilateFactor,
    DilateIdentityReport, DilateOptions, PrimeClass,
};
pub use error::{Error, Result};
pub use funcspec::{DefaultRule, MultiplicativeSpec, SpecKind};
pub use pretentious::{
    aperiodicity_scan, distance_squared, strong_aperiodicity_profile,
    strong_aperiodicity_statistic, weak_pretension_estimate, wirsing_defect, AperiodicityStatistic,
    DistanceReport, GridParams,
};
pub use sieve::{cache_load, cache_store, sieve_range, SieveOptions, Storage, ValueTable};
pub use symbolic::{
    autocorrelation_sequence, block_complexity, cylinder_density, empirical_measure,
    ComplexityProfile, CylinderPattern, EmpiricalMeasure, Letter, Mode, Quantizer,
    SymbolicSequence,
};
