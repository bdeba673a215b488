//! Record-level data-quality loss and the high-disparity relabeling.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{sample_sorted, DataTable, Group};
use crate::models::ImportanceRanking;
use crate::seed;

pub const MISSINGNESS_TOP_FEATURES: usize = 5;
pub const MAX_MISSINGNESS_RATE: f64 = 0.6;
pub const SKEW_SHARE: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegradeError {
    #[error("subsample of {rows} rows at {requested} is empty")]
    EmptyResult { rows: usize, requested: f64 },
    #[error("feature `{0}` is not in the importance ranking")]
    UnknownFeature(String),
    #[error("table has no positive predictions to reassign")]
    NoPositivePredictions,
    #[error("invalid degradation parameter: {0}")]
    InvalidParameter(String),
}

/// One degradation step. Ranking-based steps take the ranking at apply time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegradationSpec {
    Subsample { fraction: f64 },
    SubsampleRows { rows: usize },
    DropWeakestFeatures { count: usize },
    DropStrongestFeatures { count: usize },
    DisparateMissingness { rate: f64 },
    SkewDisparity { share: f64 },
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<(), DegradeError> {
        let bad = |m: String| Err(DegradeError::InvalidParameter(m));
        match *self {
            DegradationSpec::Subsample { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                bad(format!("subsample fraction {fraction} outside (0, 1]"))
            }
            DegradationSpec::SubsampleRows { rows: 0 } => bad("subsample of zero rows".into()),
            DegradationSpec::DisparateMissingness { rate }
                if !(0.0..=MAX_MISSINGNESS_RATE).contains(&rate) =>
            {
                bad(format!(
                    "missingness rate {rate} outside [0, {MAX_MISSINGNESS_RATE}]"
                ))
            }
            DegradationSpec::SkewDisparity { share } if !(0.0..=1.0).contains(&share) => {
                bad(format!("skew share {share} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in result files, e.g. `drop_weakest=3`.
    pub fn label(&self) -> String {
        match self {
            DegradationSpec::Subsample { fraction } => format!("subsample={fraction}"),
            DegradationSpec::SubsampleRows { rows } => format!("subsample={rows}"),
            DegradationSpec::DropWeakestFeatures { count } => format!("drop_weakest={count}"),
            DegradationSpec::DropStrongestFeatures { count } => format!("drop_strongest={count}"),
            DegradationSpec::DisparateMissingness { rate } => format!("missingness={rate}"),
            DegradationSpec::SkewDisparity { share } => format!("skew={share}"),
        }
    }

    pub fn apply(
        &self,
        table: &DataTable,
        ranking: Option<&ImportanceRanking>,
        seed_value: u64,
    ) -> Result<DataTable, DegradeError> {
        self.validate()?;
        let need = || {
            ranking.ok_or_else(|| {
                DegradeError::InvalidParameter(format!(
                    "{} needs an importance ranking",
                    self.label()
                ))
            })
        };
        match *self {
            DegradationSpec::Subsample { fraction } => subsample(table, fraction, seed_value),
            DegradationSpec::SubsampleRows { rows } => subsample_rows(table, rows, seed_value),
            DegradationSpec::DropWeakestFeatures { count } => {
                drop_weakest_features(table, count, need()?)
            }
            DegradationSpec::DropStrongestFeatures { count } => {
                drop_strongest_features(table, count, need()?)
            }
            DegradationSpec::DisparateMissingness { rate } => {
                inject_missingness(table, rate, need()?, MISSINGNESS_TOP_FEATURES, seed_value)
            }
            DegradationSpec::SkewDisparity { share } => skew_disparity(table, share, seed_value),
        }
    }
}

/// `round(fraction * n)` rows without replacement, in source order.
pub fn subsample(
    table: &DataTable,
    fraction: f64,
    seed_value: u64,
) -> Result<DataTable, DegradeError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DegradeError::InvalidParameter(format!(
            "subsample fraction {fraction} outside (0, 1]"
        )));
    }
    let n = table.n_rows();
    if fraction == 1.0 {
        return Ok(table.clone());
    }
    let k = (fraction * n as f64).round() as usize;
    if k == 0 {
        return Err(DegradeError::EmptyResult {
            rows: n,
            requested: fraction,
        });
    }
    let mut rng = seed::rng(seed_value);
    Ok(table.select_rows(&sample_sorted(&mut rng, n, k)))
}

/// `rows` rows without replacement, in source order; the whole table when it
/// has no more than `rows`.
pub fn subsample_rows(
    table: &DataTable,
    rows: usize,
    seed_value: u64,
) -> Result<DataTable, DegradeError> {
    let n = table.n_rows();
    if rows == 0 {
        return Err(DegradeError::EmptyResult {
            rows: n,
            requested: 0.0,
        });
    }
    if rows >= n {
        return Ok(table.clone());
    }
    let mut rng = seed::rng(seed_value);
    Ok(table.select_rows(&sample_sorted(&mut rng, n, rows)))
}

fn check_ranking(table: &DataTable, ranking: &ImportanceRanking) -> Result<(), DegradeError> {
    let names = ranking.names();
    match table.feature_names().find(|f| !names.contains(f)) {
        Some(f) => Err(DegradeError::UnknownFeature(f.to_string())),
        None => Ok(()),
    }
}

/// Removes the `k` least important features (cumulative).
pub fn drop_weakest_features(
    table: &DataTable,
    k: usize,
    ranking: &ImportanceRanking,
) -> Result<DataTable, DegradeError> {
    check_ranking(table, ranking)?;
    if k > ranking.entries.len() {
        return Err(DegradeError::InvalidParameter(format!(
            "cannot drop {k} of {} features",
            ranking.entries.len()
        )));
    }
    Ok(table.clone().without_features(&ranking.weakest(k)))
}

/// Removes the `k` most important features (cumulative).
pub fn drop_strongest_features(
    table: &DataTable,
    k: usize,
    ranking: &ImportanceRanking,
) -> Result<DataTable, DegradeError> {
    check_ranking(table, ranking)?;
    if k > ranking.entries.len() {
        return Err(DegradeError::InvalidParameter(format!(
            "cannot drop {k} of {} features",
            ranking.entries.len()
        )));
    }
    Ok(table.clone().without_features(&ranking.strongest(k)))
}

/// Blanks `floor(rate * n_underprivileged)` cells in each of the `m` most
/// important features, independently per feature, among underprivileged rows
/// only.
pub fn inject_missingness(
    table: &DataTable,
    rate: f64,
    ranking: &ImportanceRanking,
    m: usize,
    seed_value: u64,
) -> Result<DataTable, DegradeError> {
    if !(0.0..=MAX_MISSINGNESS_RATE).contains(&rate) {
        return Err(DegradeError::InvalidParameter(format!(
            "missingness rate {rate} outside [0, {MAX_MISSINGNESS_RATE}]"
        )));
    }
    let under: Vec<usize> = table
        .groups()
        .iter()
        .enumerate()
        .filter(|(_, g)| **g == Group::Underprivileged)
        .map(|(i, _)| i)
        .collect();
    let count = (rate * under.len() as f64).floor() as usize;
    let mut out = table.clone();
    if count == 0 {
        return Ok(out);
    }
    for (f, name) in ranking.strongest(m).into_iter().enumerate() {
        // features already dropped from the table have nothing to blank
        let Some(idx) = table.column_index(name) else {
            continue;
        };
        let mut rng = seed::rng(seed::derive(seed_value, "missingness", f as u64));
        let column = out.column_mut(idx);
        for pick in sample(&mut rng, under.len(), count) {
            column.set_missing(under[pick]);
        }
    }
    Ok(out)
}

/// Relabels rows with a positive prediction: `round(share * P)` of them,
/// chosen uniformly, become underprivileged and the rest privileged.
pub fn skew_disparity(
    table: &DataTable,
    share: f64,
    seed_value: u64,
) -> Result<DataTable, DegradeError> {
    if !(0.0..=1.0).contains(&share) {
        return Err(DegradeError::InvalidParameter(format!(
            "skew share {share} outside [0, 1]"
        )));
    }
    let predictions = table
        .predictions()
        .ok_or(DegradeError::NoPositivePredictions)?;
    let positives: Vec<usize> = predictions
        .iter()
        .enumerate()
        .filter(|(_, p)| **p)
        .map(|(i, _)| i)
        .collect();
    if positives.is_empty() {
        return Err(DegradeError::NoPositivePredictions);
    }
    let k = (share * positives.len() as f64).round() as usize;
    let mut rng = seed::rng(seed_value);
    let mut to_under = vec![false; positives.len()];
    for i in sample(&mut rng, positives.len(), k) {
        to_under[i] = true;
    }
    let mut groups = table.groups().to_vec();
    for (row, under) in positives.into_iter().zip(to_under) {
        groups[row] = if under {
            Group::Underprivileged
        } else {
            Group::Privileged
        };
    }
    Ok(table.clone().with_groups(groups).expect("same row count"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_benchmark, BenchmarkSpec};
    use crate::models::{feature_importance, predict, train, ModelClass, ModelSpec};
    use proptest::prelude::*;

    fn bench(n: usize, seed_value: u64) -> DataTable {
        generate_benchmark(&BenchmarkSpec {
            n_rows: n,
            n_numeric_features: 6,
            n_categorical_features: 1,
            group_balance: 0.4,
            base_rate_privileged: 0.5,
            base_rate_underprivileged: 0.35,
            signal_strength: 2.0,
            weight_decay: 0.7,
            group_shift: 0.0,
            seed: seed_value,
        })
        .unwrap()
    }

    fn ranking(t: &DataTable) -> ImportanceRanking {
        // order by column position: num_0 strongest
        let names: Vec<&str> = t.feature_names().collect();
        ImportanceRanking {
            entries: names
                .iter()
                .rev()
                .enumerate()
                .map(|(i, n)| (n.to_string(), i as f64))
                .collect(),
        }
    }

    fn with_predictions(t: DataTable, pred: Vec<bool>) -> DataTable {
        t.with_predictions(pred).unwrap()
    }

    #[test]
    fn subsample_basics() {
        let t = bench(100, 1);
        assert_eq!(subsample(&t, 1.0, 3).unwrap(), t);
        let half = subsample(&t, 0.5, 3).unwrap();
        assert_eq!(half.n_rows(), 50);
        assert!(matches!(
            subsample(&t, 0.004, 3),
            Err(DegradeError::EmptyResult { .. })
        ));
        assert!(subsample(&t, 0.0, 3).is_err());
        assert!(subsample(&t, 1.5, 3).is_err());
        assert_eq!(subsample_rows(&t, 500, 3).unwrap(), t);
        assert_eq!(subsample_rows(&t, 30, 3).unwrap().n_rows(), 30);
    }

    #[test]
    fn subsample_mean_is_unbiased() {
        let t = bench(2000, 2);
        let p = t.targets().iter().filter(|&&v| v).count() as f64 / 2000.0;
        let k = 600.0;
        let means: Vec<f64> = (0..500)
            .map(|s| {
                let s = subsample(&t, 0.3, s).unwrap();
                s.targets().iter().filter(|&&v| v).count() as f64 / k
            })
            .collect();
        let avg = crate::stats::mean(&means);
        // finite-population sd of the average of 500 draws, 99% band
        let sd = (p * (1.0 - p) / k * (2000.0 - k) / 1999.0).sqrt() / (500f64).sqrt();
        assert!((avg - p).abs() < 2.576 * sd, "{avg} vs {p}");
    }

    #[test]
    fn drop_features() {
        let t = bench(50, 3);
        let r = ranking(&t);
        assert_eq!(drop_weakest_features(&t, 0, &r).unwrap(), t);
        let all = drop_weakest_features(&t, 7, &r).unwrap();
        assert_eq!(all.n_features(), 0);
        assert_eq!(all.targets(), t.targets());
        let w = drop_weakest_features(&t, 2, &r).unwrap();
        assert_eq!(
            w.feature_names().collect::<Vec<_>>(),
            ["num_0", "num_1", "num_2", "num_3", "num_4"]
        );
        let s = drop_strongest_features(&t, 2, &r).unwrap();
        assert_eq!(
            s.feature_names().collect::<Vec<_>>(),
            ["num_2", "num_3", "num_4", "num_5", "cat_0"]
        );
        assert!(drop_weakest_features(&t, 8, &r).is_err());
        let partial = ImportanceRanking {
            entries: r.entries[1..].to_vec(),
        };
        assert!(matches!(
            drop_weakest_features(&t, 1, &partial),
            Err(DegradeError::UnknownFeature(_))
        ));
    }

    #[test]
    fn missingness_counts() {
        let t = bench(200, 4);
        let r = ranking(&t);
        let n_under = t.count_group(Group::Underprivileged);
        assert_eq!(inject_missingness(&t, 0.0, &r, 5, 1).unwrap(), t);
        let d = inject_missingness(&t, 0.2, &r, 5, 1).unwrap();
        let expected = (0.2 * n_under as f64).floor() as usize;
        for (j, (before, after)) in t.columns().iter().zip(d.columns()).enumerate() {
            let missing: Vec<usize> = (0..200)
                .filter(|&i| after.is_missing(i) && !before.is_missing(i))
                .collect();
            if j < 5 {
                assert_eq!(missing.len(), expected);
                assert!(missing
                    .iter()
                    .all(|&i| t.groups()[i] == Group::Underprivileged));
            } else {
                assert!(missing.is_empty());
            }
        }
        assert!(inject_missingness(&t, 0.7, &r, 5, 1).is_err());
    }

    #[test]
    fn missingness_fifty_rows_rate_point_two() {
        let t = bench(200, 5);
        let under: Vec<usize> = (0..200)
            .filter(|&i| t.groups()[i] == Group::Underprivileged)
            .take(50)
            .collect();
        let priv_rows: Vec<usize> = (0..200)
            .filter(|&i| t.groups()[i] == Group::Privileged)
            .collect();
        let rows: Vec<usize> = under.iter().chain(&priv_rows).copied().collect();
        let t = t.select_rows(&rows);
        let d = inject_missingness(&t, 0.2, &ranking(&t), 5, 9).unwrap();
        for c in &d.columns()[..5] {
            assert_eq!((0..t.n_rows()).filter(|&i| c.is_missing(i)).count(), 10);
        }
    }

    #[test]
    fn skew_two_hundred_positives() {
        let t = bench(400, 6);
        let pred: Vec<bool> = (0..400).map(|i| i % 2 == 0).collect();
        let t = with_predictions(t, pred);
        let s = skew_disparity(&t, SKEW_SHARE, 3).unwrap();
        let pos_under = (0..400)
            .filter(|&i| i % 2 == 0 && s.groups()[i] == Group::Underprivileged)
            .count();
        assert_eq!(pos_under, 190);
        for i in (1..400).step_by(2) {
            assert_eq!(s.groups()[i], t.groups()[i]);
        }
        assert_eq!(s.columns(), t.columns());
        assert_eq!(s.targets(), t.targets());
        assert_eq!(s.predictions(), t.predictions());
    }

    #[test]
    fn skew_single_positive_and_errors() {
        let t = bench(10, 7);
        let mut pred = vec![false; 10];
        pred[3] = true;
        let s = skew_disparity(&with_predictions(t.clone(), pred), SKEW_SHARE, 0).unwrap();
        assert_eq!(s.groups()[3], Group::Underprivileged);
        assert!(matches!(
            skew_disparity(&with_predictions(t.clone(), vec![false; 10]), SKEW_SHARE, 0),
            Err(DegradeError::NoPositivePredictions)
        ));
        assert!(matches!(
            skew_disparity(&t, SKEW_SHARE, 0),
            Err(DegradeError::NoPositivePredictions)
        ));
    }

    #[test]
    fn dropping_strongest_moves_metric_more_than_weakest() {
        let t = generate_benchmark(&BenchmarkSpec {
            n_rows: 4000,
            n_numeric_features: 5,
            n_categorical_features: 0,
            group_balance: 0.5,
            base_rate_privileged: 0.6,
            base_rate_underprivileged: 0.3,
            signal_strength: 3.0,
            weight_decay: 0.05,
            group_shift: 1.0,
            seed: 8,
        })
        .unwrap();
        let m = train(&ModelSpec::new(ModelClass::LogisticRegression), &t, 0).unwrap();
        let r = feature_importance(&m, &t, 0).unwrap();
        let spd = |d: &DataTable| {
            let g = crate::metrics::confusion_by_group(&predict(&m, d)).unwrap();
            crate::metrics::parity_value(&g.convert::<f64>(), crate::metrics::Metric::Spd).unwrap()
        };
        let base = spd(&t);
        let weak = spd(&drop_weakest_features(&t, 1, &r).unwrap());
        let strong = spd(&drop_strongest_features(&t, 1, &r).unwrap());
        assert!((strong - base).abs() > (weak - base).abs());
    }

    #[test]
    fn spec_round_trip_and_apply() {
        let t = bench(100, 9);
        let r = ranking(&t);
        for spec in [
            DegradationSpec::Subsample { fraction: 0.5 },
            DegradationSpec::SubsampleRows { rows: 10 },
            DegradationSpec::DropWeakestFeatures { count: 2 },
            DegradationSpec::DropStrongestFeatures { count: 1 },
            DegradationSpec::DisparateMissingness { rate: 0.3 },
        ] {
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(
                serde_json::from_str::<DegradationSpec>(&json).unwrap(),
                spec
            );
            assert_eq!(
                spec.apply(&t, Some(&r), 1).unwrap(),
                spec.apply(&t, Some(&r), 1).unwrap()
            );
        }
        assert!(DegradationSpec::DropWeakestFeatures { count: 1 }
            .apply(&t, None, 0)
            .is_err());
        assert!(DegradationSpec::DisparateMissingness { rate: 0.9 }
            .validate()
            .is_err());
    }

    proptest! {
        #[test]
        fn identity_steps_compose(order in Just([0usize, 1, 2]).prop_shuffle(), s in 0u64..1000) {
            let t = bench(60, s);
            let r = ranking(&t);
            let steps = [
                DegradationSpec::DisparateMissingness { rate: 0.0 },
                DegradationSpec::DropWeakestFeatures { count: 0 },
                DegradationSpec::Subsample { fraction: 1.0 },
            ];
            let mut out = t.clone();
            for i in order {
                out = steps[i].apply(&out, Some(&r), s).unwrap();
            }
            prop_assert_eq!(out, t);
        }

        #[test]
        fn degradations_only_add_missing(rate in 0.0f64..0.6, k in 0usize..7, s in 0u64..1000) {
            let t = bench(80, s);
            let r = ranking(&t);
            let d = inject_missingness(&t, rate, &r, 5, s).unwrap();
            for (a, b) in t.columns().iter().zip(d.columns()) {
                for i in 0..80 {
                    if !b.is_missing(i) {
                        prop_assert_eq!(a.cell_text(i), b.cell_text(i));
                    }
                }
            }
            let sub = subsample(&t, 0.5, s).unwrap();
            let dropped = drop_weakest_features(&sub, k, &r).unwrap();
            for name in dropped.feature_names() {
                prop_assert_eq!(dropped.column(name), sub.column(name));
            }
            let priv_before: Vec<usize> = (0..80).filter(|&i| t.groups()[i] == Group::Privileged).collect();
            for (a, b) in t.columns().iter().zip(d.columns()) {
                for &i in &priv_before {
                    prop_assert_eq!(a.cell_text(i), b.cell_text(i));
                }
            }
        }

        #[test]
        fn skew_preserves_margins(s in 0u64..1000) {
            let t = bench(120, s);
            let pred: Vec<bool> = t.targets().to_vec();
            prop_assume!(pred.iter().any(|&v| v));
            let t = with_predictions(t, pred);
            let k = skew_disparity(&t, SKEW_SHARE, s).unwrap();
            prop_assert_eq!(k.n_rows(), t.n_rows());
            prop_assert_eq!(k.targets(), t.targets());
            prop_assert_eq!(k.predictions(), t.predictions());
        }
    }
}
