//! Simulated third-party fairness audits under degraded data access.

pub mod cli;
pub mod dataset;
pub mod degrade;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod privacy;
pub mod reliability;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod synth;

pub use scalar::Scalar;

/// Integer confusion counts per group.
pub type ConfusionCounts = metrics::GroupedConfusion<u64>;
/// Floating-point confusion cells, as produced by weighted or noisy counts.
pub type RealConfusion = metrics::GroupedConfusion<f64>;
/// Exact rational confusion cells.
pub type ExactConfusion = metrics::GroupedConfusion<num_rational::Rational64>;
/// Interval over `f64` bounds.
pub type RealInterval = reliability::Interval<f64>;
