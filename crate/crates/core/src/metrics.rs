//! Group confusion matrices, parity metrics and percentile bootstrap
//! intervals.
//!
//! All differences are underprivileged minus privileged, so 0 is parity and a
//! negative value means the underprivileged group has the lower rate.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataTable, Group};
use crate::reliability::Interval;
use crate::scalar::Scalar;
use crate::{seed, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    /// Statistical parity difference.
    #[serde(rename = "SPD")]
    Spd,
    /// Average odds difference.
    #[serde(rename = "AOD")]
    Aod,
    /// Equal opportunity difference.
    #[serde(rename = "EOD")]
    Eod,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Spd, Metric::Aod, Metric::Eod];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Spd => "SPD",
            Metric::Aod => "AOD",
            Metric::Eod => "EOD",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SPD" => Ok(Metric::Spd),
            "AOD" => Ok(Metric::Aod),
            "EOD" => Ok(Metric::Eod),
            _ => Err(format!("unknown metric `{s}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("table carries no predictions")]
    PredictionsAbsent,
    #[error("{0:?} group has no rows")]
    EmptyGroup(Group),
    #[error("{metric}: {denominator} is not positive")]
    UndefinedRate {
        metric: Metric,
        denominator: &'static str,
    },
    #[error("{metric}: {dropped} of {total} bootstrap resamples were uncomputable")]
    TooManyDegenerate {
        metric: Metric,
        dropped: usize,
        total: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix<T> {
    pub tp: T,
    pub fp: T,
    #[serde(rename = "fn")]
    pub fn_: T,
    pub tn: T,
}

impl<T: Copy> ConfusionMatrix<T> {
    pub fn new(tp: T, fp: T, fn_: T, tn: T) -> Self {
        Self { tp, fp, fn_, tn }
    }

    /// Cells in (tp, fp, fn, tn) order.
    pub fn cells(&self) -> [T; 4] {
        [self.tp, self.fp, self.fn_, self.tn]
    }

    pub fn from_cells(c: [T; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn map<U: Copy>(self, mut f: impl FnMut(T) -> U) -> ConfusionMatrix<U> {
        ConfusionMatrix::new(f(self.tp), f(self.fp), f(self.fn_), f(self.tn))
    }
}

impl<T: Scalar> ConfusionMatrix<T> {
    pub fn total(&self) -> T {
        self.tp + self.fp + self.fn_ + self.tn
    }
    pub fn predicted_positive(&self) -> T {
        self.tp + self.fp
    }
    pub fn actual_positive(&self) -> T {
        self.tp + self.fn_
    }
    pub fn actual_negative(&self) -> T {
        self.fp + self.tn
    }
}

impl ConfusionMatrix<u64> {
    pub fn count_total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupedConfusion<T> {
    pub underprivileged: ConfusionMatrix<T>,
    pub privileged: ConfusionMatrix<T>,
}

impl<T: Copy> GroupedConfusion<T> {
    /// Underprivileged cells then privileged cells, each (tp, fp, fn, tn).
    pub fn cells(&self) -> [T; 8] {
        let u = self.underprivileged.cells();
        let p = self.privileged.cells();
        [u[0], u[1], u[2], u[3], p[0], p[1], p[2], p[3]]
    }

    pub fn from_cells(c: [T; 8]) -> Self {
        Self {
            underprivileged: ConfusionMatrix::new(c[0], c[1], c[2], c[3]),
            privileged: ConfusionMatrix::new(c[4], c[5], c[6], c[7]),
        }
    }

    pub fn map<U: Copy>(self, mut f: impl FnMut(T) -> U) -> GroupedConfusion<U> {
        GroupedConfusion {
            underprivileged: self.underprivileged.map(&mut f),
            privileged: self.privileged.map(&mut f),
        }
    }

    pub fn swapped(self) -> Self {
        Self {
            underprivileged: self.privileged,
            privileged: self.underprivileged,
        }
    }
}

impl GroupedConfusion<u64> {
    /// Converts counts into any scalar type.
    pub fn convert<T: Scalar>(&self) -> GroupedConfusion<T> {
        self.map(|c| T::from_u64(c).expect("count representable in scalar type"))
    }
}

/// A metric value with an optional interval at `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub metric: Metric,
    pub value: f64,
    pub interval: Option<Interval>,
    pub level: Option<f64>,
}

impl MetricEstimate {
    pub fn point(metric: Metric, value: f64) -> Self {
        Self {
            metric,
            value,
            interval: None,
            level: None,
        }
    }
}

/// Index of a row's cell in [`GroupedConfusion::cells`] order.
fn cell_code(group: Group, y: bool, y_hat: bool) -> usize {
    let base = match group {
        Group::Underprivileged => 0,
        Group::Privileged => 4,
    };
    base + match (y, y_hat) {
        (true, true) => 0,
        (false, true) => 1,
        (true, false) => 2,
        (false, false) => 3,
    }
}

fn cell_codes(table: &DataTable) -> Result<Vec<u8>, MetricError> {
    let predictions = table.predictions().ok_or(MetricError::PredictionsAbsent)?;
    Ok(table
        .groups()
        .iter()
        .zip(table.targets())
        .zip(predictions)
        .map(|((&g, &y), &p)| cell_code(g, y, p) as u8)
        .collect())
}

fn tally(codes: impl Iterator<Item = u8>) -> GroupedConfusion<u64> {
    let mut counts = [0u64; 8];
    for c in codes {
        counts[c as usize] += 1;
    }
    GroupedConfusion::from_cells(counts)
}

/// Per-group confusion counts. Fails if predictions are absent or a group
/// has no rows.
pub fn confusion_by_group(table: &DataTable) -> Result<GroupedConfusion<u64>, MetricError> {
    let counts = tally(cell_codes(table)?.into_iter());
    if counts.underprivileged.count_total() == 0 {
        return Err(MetricError::EmptyGroup(Group::Underprivileged));
    }
    if counts.privileged.count_total() == 0 {
        return Err(MetricError::EmptyGroup(Group::Privileged));
    }
    Ok(counts)
}

fn rate<T: Scalar>(num: T, den: T, metric: Metric, what: &'static str) -> Result<T, MetricError> {
    if den > T::zero() {
        Ok(num / den)
    } else {
        Err(MetricError::UndefinedRate {
            metric,
            denominator: what,
        })
    }
}

/// Underprivileged-minus-privileged parity metric on any scalar type.
pub fn parity_value<T: Scalar>(g: &GroupedConfusion<T>, metric: Metric) -> Result<T, MetricError> {
    let (u, p) = (&g.underprivileged, &g.privileged);
    match metric {
        Metric::Spd => {
            let ru = rate(
                u.predicted_positive(),
                u.total(),
                metric,
                "underprivileged total",
            )?;
            let rp = rate(
                p.predicted_positive(),
                p.total(),
                metric,
                "privileged total",
            )?;
            Ok(ru - rp)
        }
        Metric::Eod => {
            let tu = rate(u.tp, u.actual_positive(), metric, "underprivileged tp+fn")?;
            let tp = rate(p.tp, p.actual_positive(), metric, "privileged tp+fn")?;
            Ok(tu - tp)
        }
        Metric::Aod => {
            let tu = rate(u.tp, u.actual_positive(), metric, "underprivileged tp+fn")?;
            let tp = rate(p.tp, p.actual_positive(), metric, "privileged tp+fn")?;
            let fu = rate(u.fp, u.actual_negative(), metric, "underprivileged fp+tn")?;
            let fp = rate(p.fp, p.actual_negative(), metric, "privileged fp+tn")?;
            let two = T::one() + T::one();
            Ok(((fu - fp) + (tu - tp)) / two)
        }
    }
}

/// Point estimate of `metric`.
pub fn parity_metric<T: Scalar>(
    g: &GroupedConfusion<T>,
    metric: Metric,
) -> Result<MetricEstimate, MetricError> {
    let v = parity_value(g, metric)?;
    Ok(MetricEstimate::point(
        metric,
        v.to_f64().expect("metric value representable as f64"),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    /// Fraction of uncomputable resamples above which the interval is
    /// abandoned.
    pub const MAX_DEGENERATE: f64 = 0.2;

    pub fn new(resamples: usize, seed: u64) -> Self {
        Self {
            resamples,
            level: 0.95,
            seed,
        }
    }

    fn validate(&self) -> Result<(), MetricError> {
        if self.resamples == 0 {
            return Err(MetricError::InvalidParameter(
                "resamples must be positive".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(MetricError::InvalidParameter(format!(
                "level {} not in (0, 1)",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome {
    /// Point value on the full table with the percentile interval.
    pub estimate: MetricEstimate,
    /// Computable resample values in resample order.
    pub values: Vec<f64>,
    pub n_uncomputable: usize,
}

/// Confusion counts of `resamples` row resamples (with replacement, same size
/// as the table). Resample `b` draws from its own stream derived from
/// `(seed, b)`, so the output does not depend on scheduling.
pub fn resample_confusions(
    table: &DataTable,
    resamples: usize,
    seed: u64,
) -> Result<Vec<GroupedConfusion<u64>>, MetricError> {
    let codes = cell_codes(table)?;
    if codes.is_empty() {
        return Err(MetricError::InvalidParameter("empty table".into()));
    }
    let n = codes.len();
    Ok((0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::rng(seed::stream(seed, b as u64));
            tally((0..n).map(|_| codes[rng.random_range(0..n)]))
        })
        .collect())
}

/// Bootstraps several metrics from one shared set of resamples.
pub fn bootstrap_metrics(
    table: &DataTable,
    metrics: &[Metric],
    config: &BootstrapConfig,
) -> Result<Vec<Result<BootstrapOutcome, MetricError>>, MetricError> {
    config.validate()?;
    let full = confusion_by_group(table)?;
    let resampled = resample_confusions(table, config.resamples, config.seed)?;
    Ok(metrics
        .iter()
        .map(|&metric| {
            let point = parity_value(&full.convert::<f64>(), metric)?;
            let mut values = Vec::with_capacity(resampled.len());
            let mut dropped = 0;
            for g in &resampled {
                match parity_value(&g.convert::<f64>(), metric) {
                    Ok(v) => values.push(v),
                    Err(_) => dropped += 1,
                }
            }
            summarize(metric, point, values, dropped, config)
        })
        .collect())
}

pub(crate) fn summarize(
    metric: Metric,
    point: f64,
    values: Vec<f64>,
    dropped: usize,
    config: &BootstrapConfig,
) -> Result<BootstrapOutcome, MetricError> {
    let total = values.len() + dropped;
    if values.is_empty() || dropped as f64 > BootstrapConfig::MAX_DEGENERATE * total as f64 {
        return Err(MetricError::TooManyDegenerate {
            metric,
            dropped,
            total,
        });
    }
    let interval = stats::percentile_interval(&values, config.level);
    Ok(BootstrapOutcome {
        estimate: MetricEstimate {
            metric,
            value: point,
            interval: Some(interval),
            level: Some(config.level),
        },
        values,
        n_uncomputable: dropped,
    })
}

/// Percentile bootstrap interval for one metric.
pub fn bootstrap_ci(
    table: &DataTable,
    metric: Metric,
    config: &BootstrapConfig,
) -> Result<BootstrapOutcome, MetricError> {
    bootstrap_metrics(table, &[metric], config)?.remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema {
            feature_columns: vec![],
            group_column: "g".into(),
            privileged_value: "p".into(),
            underprivileged_value: "u".into(),
            target_column: "y".into(),
            prediction_column: None,
            missing_token: String::new(),
        }
    }

    pub(crate) fn table_from(rows: &[(bool, bool, Group)]) -> DataTable {
        DataTable::new(
            schema(),
            vec![],
            rows.iter().map(|r| r.2).collect(),
            rows.iter().map(|r| r.0).collect(),
            Some(rows.iter().map(|r| r.1).collect()),
        )
        .unwrap()
    }

    fn cm(tp: i64, fp: i64, fn_: i64, tn: i64) -> ConfusionMatrix<f64> {
        ConfusionMatrix::new(tp as f64, fp as f64, fn_ as f64, tn as f64)
    }

    #[test]
    fn counts_four_rows() {
        use Group::*;
        let t = table_from(&[
            (true, true, Underprivileged),
            (false, false, Underprivileged),
            (true, false, Privileged),
            (false, true, Privileged),
        ]);
        let g = confusion_by_group(&t).unwrap();
        assert_eq!(g.underprivileged, ConfusionMatrix::new(1, 0, 0, 1));
        assert_eq!(g.privileged, ConfusionMatrix::new(0, 1, 1, 0));
    }

    #[test]
    fn missing_group_or_predictions() {
        let t = table_from(&[(true, true, Group::Underprivileged)]);
        assert_eq!(
            confusion_by_group(&t),
            Err(MetricError::EmptyGroup(Group::Privileged))
        );
        let t = t.without_predictions();
        assert_eq!(confusion_by_group(&t), Err(MetricError::PredictionsAbsent));
    }

    #[test]
    fn worked_example() {
        let g = GroupedConfusion {
            underprivileged: cm(40, 10, 10, 40),
            privileged: cm(45, 15, 5, 35),
        };
        // SPD: 50/100 - 60/100; EOD: 40/50 - 45/50; AOD: ((10/50 - 15/50) + (40/50 - 45/50)) / 2
        for m in Metric::ALL {
            let v = parity_value(&g, m).unwrap();
            assert!((v + 0.10).abs() < 1e-12, "{m}: {v}");
        }
        let exact = g.map(|c| Rational64::from_integer(c as i64));
        for m in Metric::ALL {
            assert_eq!(parity_value(&exact, m).unwrap(), Rational64::new(-1, 10));
        }
    }

    #[test]
    fn identical_groups_are_parity() {
        let c = cm(7, 3, 2, 9);
        let g = GroupedConfusion {
            underprivileged: c,
            privileged: c,
        };
        for m in Metric::ALL {
            assert_eq!(parity_value(&g, m).unwrap(), 0.0);
        }
    }

    #[test]
    fn perfect_predictor_base_rate_gap() {
        let g = GroupedConfusion {
            underprivileged: cm(50, 0, 0, 50),
            privileged: cm(30, 0, 0, 70),
        };
        assert!((parity_value(&g, Metric::Spd).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(parity_value(&g, Metric::Eod).unwrap(), 0.0);
        assert_eq!(parity_value(&g, Metric::Aod).unwrap(), 0.0);
    }

    #[test]
    fn zero_denominators() {
        let g = GroupedConfusion {
            underprivileged: cm(0, 3, 0, 2),
            privileged: cm(4, 1, 1, 2),
        };
        assert!(parity_value(&g, Metric::Spd).is_ok());
        assert!(matches!(
            parity_value(&g, Metric::Eod),
            Err(MetricError::UndefinedRate { .. })
        ));
        assert!(matches!(
            parity_value(&g, Metric::Aod),
            Err(MetricError::UndefinedRate { .. })
        ));
    }

    #[test]
    fn works_in_f32() {
        let g = GroupedConfusion {
            underprivileged: ConfusionMatrix::new(40.0f32, 10.0, 10.0, 40.0),
            privileged: ConfusionMatrix::new(45.0f32, 15.0, 5.0, 35.0),
        };
        assert!((parity_value(&g, Metric::Spd).unwrap() + 0.1).abs() < 1e-6);
    }

    #[test]
    fn zero_variance_bootstrap() {
        let mut rows = vec![(true, true, Group::Underprivileged); 20];
        rows.extend(vec![(true, true, Group::Privileged); 20]);
        let t = table_from(&rows);
        let out = bootstrap_ci(&t, Metric::Spd, &BootstrapConfig::new(200, 1)).unwrap();
        let i = out.estimate.interval.unwrap();
        assert_eq!((out.estimate.value, i.lower, i.upper), (0.0, 0.0, 0.0));
        assert_eq!(out.values.len(), 200);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let rows: Vec<_> = (0..60)
            .map(|i| {
                let g = if i % 3 == 0 {
                    Group::Privileged
                } else {
                    Group::Underprivileged
                };
                (i % 2 == 0, i % 5 < 2, g)
            })
            .collect();
        let t = table_from(&rows);
        let cfg = BootstrapConfig::new(500, 9);
        let a = bootstrap_ci(&t, Metric::Aod, &cfg).unwrap();
        let b = bootstrap_ci(&t, Metric::Aod, &cfg).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_ci(&t, Metric::Aod, &BootstrapConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn too_many_degenerate_resamples() {
        // a single privileged positive: most resamples lose it and EOD is undefined
        let mut rows = vec![(true, true, Group::Underprivileged); 30];
        rows.push((true, true, Group::Privileged));
        rows.extend(vec![(false, false, Group::Underprivileged); 30]);
        let t = table_from(&rows);
        let err = bootstrap_ci(&t, Metric::Eod, &BootstrapConfig::new(300, 2)).unwrap_err();
        assert!(matches!(err, MetricError::TooManyDegenerate { .. }));
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(bool, bool, Group)>> {
        let row = (
            any::<bool>(),
            any::<bool>(),
            prop_oneof![Just(Group::Privileged), Just(Group::Underprivileged)],
        );
        prop::collection::vec(row, 1..40)
    }

    proptest! {
        #[test]
        fn group_swap_negates(rows in arb_rows()) {
            let t = table_from(&rows);
            if let Ok(g) = confusion_by_group(&t) {
                let e = g.convert::<Rational64>();
                let s = g.swapped().convert::<Rational64>();
                for m in Metric::ALL {
                    match (parity_value(&e, m), parity_value(&s, m)) {
                        (Ok(a), Ok(b)) => prop_assert_eq!(a, -b),
                        (Err(_), Err(_)) => {}
                        other => prop_assert!(false, "{:?}", other),
                    }
                }
                let swapped = confusion_by_group(&t.clone().with_swapped_groups()).unwrap();
                prop_assert_eq!(swapped, g.swapped());
            }
        }

        #[test]
        fn row_order_and_duplication_invariance(rows in arb_rows(), k in 2usize..5) {
            let t = table_from(&rows);
            let mut rev = rows.clone();
            rev.reverse();
            let dup: Vec<_> = rows.iter().flat_map(|r| std::iter::repeat_n(*r, k)).collect();
            let base = confusion_by_group(&t);
            prop_assert_eq!(&base, &confusion_by_group(&table_from(&rev)));
            if let Ok(g) = base {
                let d = confusion_by_group(&table_from(&dup)).unwrap();
                for m in Metric::ALL {
                    let a = parity_value(&g.convert::<Rational64>(), m).ok();
                    let b = parity_value(&d.convert::<Rational64>(), m).ok();
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
