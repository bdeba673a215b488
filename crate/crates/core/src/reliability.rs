//! Comparison of an experimental audit against the baseline audit: interval
//! configuration, the four-way outcome and the overlap proportion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum ReliabilityError {
    #[error("interval lower bound exceeds upper bound (or is NaN)")]
    InvalidInterval,
    #[error("no experimental values to compare")]
    EmptyValues,
}

/// Closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T = f64> {
    pub lower: T,
    pub upper: T,
}

impl<T: PartialOrd + Copy> Interval<T> {
    pub fn new(lower: T, upper: T) -> Result<Self, ReliabilityError> {
        // `!(a <= b)` also rejects NaN endpoints
        if !(lower <= upper) {
            return Err(ReliabilityError::InvalidInterval);
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, v: T) -> bool {
        self.lower <= v && v <= self.upper
    }
}

impl Interval<f64> {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntervalConfiguration {
    NegativeDisparity,
    Parity,
    PositiveDisparity,
}

impl IntervalConfiguration {
    pub const ALL: [IntervalConfiguration; 3] = [
        IntervalConfiguration::NegativeDisparity,
        IntervalConfiguration::Parity,
        IntervalConfiguration::PositiveDisparity,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            IntervalConfiguration::NegativeDisparity => "negative_disparity",
            IntervalConfiguration::Parity => "parity",
            IntervalConfiguration::PositiveDisparity => "positive_disparity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuditOutcome {
    Accurate,
    Type1,
    Type2,
    Reverse,
}

impl AuditOutcome {
    pub const ALL: [AuditOutcome; 4] = [
        AuditOutcome::Accurate,
        AuditOutcome::Type1,
        AuditOutcome::Type2,
        AuditOutcome::Reverse,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            AuditOutcome::Accurate => "accurate",
            AuditOutcome::Type1 => "type1",
            AuditOutcome::Type2 => "type2",
            AuditOutcome::Reverse => "reverse",
        }
    }
}

/// Zero on a closed endpoint counts as parity.
pub fn classify_configuration<T: Scalar>(
    interval: &Interval<T>,
) -> Result<IntervalConfiguration, ReliabilityError> {
    let interval = Interval::new(interval.lower, interval.upper)?;
    let zero = T::zero();
    Ok(if interval.upper < zero {
        IntervalConfiguration::NegativeDisparity
    } else if interval.lower > zero {
        IntervalConfiguration::PositiveDisparity
    } else {
        IntervalConfiguration::Parity
    })
}

pub fn classify_outcome(
    baseline: IntervalConfiguration,
    experiment: IntervalConfiguration,
) -> AuditOutcome {
    use IntervalConfiguration::*;
    match (baseline, experiment) {
        (b, e) if b == e => AuditOutcome::Accurate,
        (Parity, _) => AuditOutcome::Type1,
        (_, Parity) => AuditOutcome::Type2,
        _ => AuditOutcome::Reverse,
    }
}

/// Fraction of `values` inside the closed baseline interval.
pub fn overlap_proportion<T: Scalar>(
    baseline: &Interval<T>,
    values: &[T],
) -> Result<f64, ReliabilityError> {
    if values.is_empty() {
        return Err(ReliabilityError::EmptyValues);
    }
    let inside = values.iter().filter(|&&v| baseline.contains(v)).count();
    Ok(inside as f64 / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub baseline_interval: Interval,
    pub baseline_config: IntervalConfiguration,
    /// Percentile interval of the experimental values.
    pub experiment_interval: Interval,
    pub experiment_config: IntervalConfiguration,
    pub outcome: AuditOutcome,
    pub overlap_proportion: f64,
    pub n_values: usize,
    pub n_uncomputable: usize,
}

/// Builds the full comparison for a pooled set of experimental values.
pub fn compare(
    baseline: Interval,
    experimental_values: &[f64],
    n_uncomputable: usize,
    level: f64,
) -> Result<ReliabilityReport, ReliabilityError> {
    if experimental_values.is_empty() {
        return Err(ReliabilityError::EmptyValues);
    }
    let baseline_config = classify_configuration(&baseline)?;
    let experiment_interval = stats::percentile_interval(experimental_values, level);
    let experiment_config = classify_configuration(&experiment_interval)?;
    Ok(ReliabilityReport {
        baseline_interval: baseline,
        baseline_config,
        experiment_interval,
        experiment_config,
        outcome: classify_outcome(baseline_config, experiment_config),
        overlap_proportion: overlap_proportion(&baseline, experimental_values)?,
        n_values: experimental_values.len(),
        n_uncomputable,
    })
}
