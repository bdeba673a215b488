use auditbench::dataset::{read_csv, write_csv, Column, DataTable, FeatureSpec, Group, Schema};
use auditbench::metrics::{confusion_by_group, parity_value, Metric};
use auditbench::models::{train, ModelClass, ModelSpec, TrainedModel};
use auditbench::privacy::{laplace_release, metric_from_noisy, LaplaceParams};
use auditbench::reliability::{compare, overlap_proportion, Interval};
use auditbench::stats;
use auditbench::synth::{fit, SynthesizerSpec};
use auditbench::ConfusionCounts;
use proptest::prelude::*;

fn schema(with_prediction: bool) -> Schema {
    Schema {
        feature_columns: vec![FeatureSpec::numeric("x"), FeatureSpec::categorical("c")],
        group_column: "group".into(),
        privileged_value: "p".into(),
        underprivileged_value: "u".into(),
        target_column: "y".into(),
        prediction_column: with_prediction.then(|| "pred".into()),
        missing_token: "NA".into(),
    }
}

type Row = (Option<f64>, Option<u32>, bool, bool, bool);

fn arb_rows(max: usize) -> impl Strategy<Value = Vec<Row>> {
    prop::collection::vec(
        (
            prop::option::weighted(0.9, -1e6f64..1e6),
            prop::option::weighted(0.9, 0u32..3),
            any::<bool>(),
            any::<bool>(),
            any::<bool>(),
        ),
        1..max,
    )
}

fn table(rows: &[Row], with_prediction: bool) -> DataTable {
    let levels: Vec<String> = ["a b", "c,d", "e\"f"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    DataTable::new(
        schema(with_prediction),
        vec![
            Column::Numeric(rows.iter().map(|r| r.0).collect()),
            Column::Categorical {
                levels,
                codes: rows.iter().map(|r| r.1).collect(),
            },
        ],
        rows.iter()
            .map(|r| {
                if r.2 {
                    Group::Privileged
                } else {
                    Group::Underprivileged
                }
            })
            .collect(),
        rows.iter().map(|r| r.3).collect(),
        with_prediction.then(|| rows.iter().map(|r| r.4).collect()),
    )
    .unwrap()
}

fn cells(t: &DataTable) -> Vec<Vec<Option<String>>> {
    (0..t.n_rows())
        .map(|i| t.columns().iter().map(|c| c.cell_text(i)).collect())
        .collect()
}

fn naive_counts(rows: &[Row]) -> ConfusionCounts {
    // [tp, fp, fn, tn] for underprivileged then privileged
    let mut c = [0u64; 8];
    for r in rows {
        let base = if r.2 { 4 } else { 0 };
        let slot = match (r.4, r.3) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        c[base + slot] += 1;
    }
    ConfusionCounts::from_cells(c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_preserves_every_cell(rows in arb_rows(40), with_prediction in any::<bool>()) {
        let t = table(&rows, with_prediction);
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), t.schema()).unwrap();
        prop_assert_eq!(back.n_rows(), t.n_rows());
        prop_assert_eq!(cells(&back), cells(&t));
        prop_assert_eq!(back.groups(), t.groups());
        prop_assert_eq!(back.targets(), t.targets());
        prop_assert_eq!(back.predictions(), t.predictions());
        let mut again = Vec::new();
        write_csv(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn confusion_matches_a_direct_tally(rows in arb_rows(40)) {
        let t = table(&rows, true);
        let expected = naive_counts(&rows);
        match confusion_by_group(&t) {
            Ok(g) => prop_assert_eq!(g, expected),
            Err(_) => prop_assert!(expected.underprivileged.count_total() == 0 || expected.privileged.count_total() == 0),
        }
    }

    #[test]
    fn metrics_are_bounded(rows in arb_rows(40)) {
        let Ok(g) = confusion_by_group(&table(&rows, true)) else { return Ok(()) };
        let g = g.convert::<f64>();
        for m in Metric::ALL {
            if let Ok(v) = parity_value(&g, m) {
                prop_assert!((-1.0..=1.0).contains(&v), "{m:?} = {v}");
            }
        }
    }

    #[test]
    fn huge_budget_release_is_exact(counts in prop::array::uniform8(1u64..500), s in any::<u64>()) {
        let g = ConfusionCounts::from_cells(counts);
        let noisy = laplace_release::<f64>(&g, LaplaceParams::new(1e9, s).unwrap());
        for m in Metric::ALL {
            let exact = parity_value(&g.convert::<f64>(), m).unwrap();
            let released = metric_from_noisy(&noisy, m).unwrap().value;
            prop_assert!((exact - released).abs() < 1e-6);
        }
    }

    #[test]
    fn overlap_is_a_proportion(values in prop::collection::vec(-2.0f64..2.0, 1..200), a in -1.0f64..1.0, w in 0.0f64..1.0) {
        let b = Interval::new(a, a + w).unwrap();
        let o = overlap_proportion(&b, &values).unwrap();
        prop_assert!((0.0..=1.0).contains(&o));
        let r = compare(b, &values, 0, 0.95).unwrap();
        prop_assert_eq!(r.overlap_proportion, o);
        prop_assert_eq!(r.n_values, values.len());
        let own = stats::percentile_interval(&values, 0.95);
        prop_assert!(own.lower <= own.upper);
    }
}

fn benchmark(n: usize, seed: u64) -> DataTable {
    auditbench::dataset::generate_benchmark(&auditbench::dataset::BenchmarkSpec {
        n_rows: n,
        n_numeric_features: 3,
        n_categorical_features: 1,
        group_balance: 0.4,
        base_rate_privileged: 0.5,
        base_rate_underprivileged: 0.35,
        signal_strength: 2.0,
        weight_decay: 0.7,
        group_shift: 0.0,
        seed,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn model_json_round_trip(class in prop_oneof![Just(ModelClass::LogisticRegression), Just(ModelClass::BoostedStumps)], s in 0u64..1000) {
        let t = benchmark(300, s);
        let mut spec = ModelSpec::new(class);
        spec.epochs = 30;
        spec.n_stumps = 20;
        let m = train(&spec, &t, s).unwrap();
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.predict_proba(&t), m.predict_proba(&t));
    }

    #[test]
    fn synthetic_samples_follow_the_schema(kind in 0usize..3, n in 1usize..200, s in 0u64..1000) {
        let spec = [
            SynthesizerSpec::IndependentMarginals,
            SynthesizerSpec::GaussianCopula,
            SynthesizerSpec::ChainBayesDp { epsilon: 1.0, bins: 4 },
        ][kind]
        .clone();
        let t = benchmark(200, s);
        let f = fit(&spec, &t, s).unwrap();
        let a = f.sample(n, s).unwrap();
        prop_assert_eq!(a.n_rows(), n);
        prop_assert_eq!(a.schema(), t.schema());
        prop_assert_eq!(&a, &f.sample(n, s).unwrap());
    }
}
