//! Laplace-mechanism release of grouped confusion matrices.
//!
//! Every record falls in exactly one of the eight group x outcome cells, so
//! each cell receives noise of scale `1 / epsilon` and the release as a whole
//! costs `epsilon` by parallel composition.

use std::io::Write;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{parity_value, GroupedConfusion, Metric, MetricError, MetricEstimate};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("privacy budget must be positive and finite, got {0}")]
    NonPositiveEpsilon(f64),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    epsilon: f64,
    seed: u64,
}

impl LaplaceParams {
    /// L1 sensitivity of a disjoint count cell.
    pub const SENSITIVITY: f64 = 1.0;

    pub fn new(epsilon: f64, seed: u64) -> Result<Self, PrivacyError> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(PrivacyError::NonPositiveEpsilon(epsilon));
        }
        Ok(Self { epsilon, seed })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        Self::SENSITIVITY / self.epsilon
    }
}

/// One draw from Laplace(0, `scale`) by inversion.
pub fn sample_laplace(rng: &mut impl Rng, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyGroupedConfusion<F> {
    pub cells: GroupedConfusion<F>,
    pub params: LaplaceParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostProcessing {
    None,
    #[default]
    ClampZero,
}

/// Adds independent Laplace noise to each of the eight cells.
pub fn laplace_release<F: Scalar + Float>(
    grouped: &GroupedConfusion<u64>,
    params: LaplaceParams,
) -> NoisyGroupedConfusion<F> {
    let mut rng = seed::rng(params.seed);
    let scale = params.scale();
    let exact = grouped.cells();
    let noisy = exact.map(|c| {
        let noise = sample_laplace(&mut rng, scale);
        F::from_f64(c as f64 + noise).expect("noisy count representable")
    });
    NoisyGroupedConfusion {
        cells: GroupedConfusion::from_cells(noisy),
        params,
    }
}

/// Data-independent post-processing; keeps the privacy guarantee.
pub fn postprocess<F: Scalar + Float>(
    noisy: &NoisyGroupedConfusion<F>,
    policy: PostProcessing,
) -> NoisyGroupedConfusion<F> {
    match policy {
        PostProcessing::None => *noisy,
        PostProcessing::ClampZero => NoisyGroupedConfusion {
            cells: noisy.cells.map(|c| c.max(F::zero())),
            params: noisy.params,
        },
    }
}

/// Parity metric on a noisy release, clamped to [-1, 1]. Any denominator the
/// metric needs must be at least 1, otherwise the draw is uncomputable.
pub fn metric_from_noisy<F: Scalar + Float>(
    noisy: &NoisyGroupedConfusion<F>,
    metric: Metric,
) -> Result<MetricEstimate, PrivacyError> {
    let (u, p) = (&noisy.cells.underprivileged, &noisy.cells.privileged);
    let mut dens = vec![
        ("underprivileged total", u.total()),
        ("privileged total", p.total()),
    ];
    if matches!(metric, Metric::Eod | Metric::Aod) {
        dens.push(("underprivileged tp+fn", u.actual_positive()));
        dens.push(("privileged tp+fn", p.actual_positive()));
    }
    if metric == Metric::Aod {
        dens.push(("underprivileged fp+tn", u.actual_negative()));
        dens.push(("privileged fp+tn", p.actual_negative()));
    }
    if let Some((what, _)) = dens.iter().find(|(_, d)| !(*d >= F::one())) {
        return Err(MetricError::UndefinedRate {
            metric,
            denominator: what,
        }
        .into());
    }
    let v = parity_value(&noisy.cells, metric)?;
    let v = v.max(-F::one()).min(F::one());
    Ok(MetricEstimate::point(
        metric,
        v.to_f64().expect("finite metric"),
    ))
}

/// Writes releases as `group,tp,fp,fn,tn,epsilon,draw_index`, two rows per
/// draw.
pub fn write_release_csv<W: Write, F: Scalar + Float>(
    releases: &[NoisyGroupedConfusion<F>],
    writer: W,
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["group", "tp", "fp", "fn", "tn", "epsilon", "draw_index"])?;
    for (i, r) in releases.iter().enumerate() {
        for (name, m) in [
            ("underprivileged", &r.cells.underprivileged),
            ("privileged", &r.cells.privileged),
        ] {
            let mut row = vec![name.to_string()];
            row.extend(m.cells().iter().map(|c| c.to_f64().unwrap().to_string()));
            row.push(r.params.epsilon().to_string());
            row.push(i.to_string());
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
