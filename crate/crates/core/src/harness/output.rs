//! Aggregation and the results, summary, provenance and report files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::metrics::Metric;
use crate::reliability::{
    classify_configuration, classify_outcome, compare, AuditOutcome, Interval, ReliabilityReport,
};
use crate::stats;

use super::{ExperimentResult, HarnessError, MetricRecord, Reference, RepetitionResult};

pub const RESULTS_HEADER: [&str; 10] = [
    "scenario",
    "experiment",
    "condition",
    "repetition",
    "metric",
    "disparity_mode",
    "value",
    "kind",
    "skipped",
    "skip_reason",
];

pub const SUMMARY_HEADER: [&str; 13] = [
    "scenario",
    "experiment",
    "condition",
    "metric",
    "disparity_mode",
    "baseline_lower",
    "baseline_upper",
    "baseline_config",
    "experiment_config",
    "outcome",
    "overlap_proportion",
    "n_values",
    "n_skipped",
];

/// Pooled comparison of one (experiment, condition, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub experiment: String,
    pub condition: String,
    pub metric: Metric,
    pub disparity_mode: String,
    pub baseline_interval: Option<Interval>,
    /// `None` when no experimental value was computable.
    pub report: Option<ReliabilityReport>,
    pub n_values: usize,
    /// Skipped repetition records plus uncomputable resamples.
    pub n_skipped: usize,
    pub median: Option<f64>,
    pub quartiles: Option<(f64, f64)>,
    /// Per-repetition outcomes in [Accurate, Type1, Type2, Reverse] order.
    pub outcome_counts: [usize; 4],
}

fn outcome_index(o: AuditOutcome) -> usize {
    match o {
        AuditOutcome::Accurate => 0,
        AuditOutcome::Type1 => 1,
        AuditOutcome::Type2 => 2,
        AuditOutcome::Reverse => 3,
    }
}

fn merge(
    results: &[ExperimentResult],
) -> Result<(&ExperimentResult, Vec<&RepetitionResult>), HarnessError> {
    let first = results.first().ok_or(HarnessError::NoResults)?;
    for r in &results[1..] {
        if r.config_hash != first.config_hash {
            return Err(HarnessError::MixedConfigs(
                first.config_hash.clone(),
                r.config_hash.clone(),
            ));
        }
    }
    let mut reps: Vec<&RepetitionResult> = results.iter().flat_map(|r| &r.repetitions).collect();
    reps.sort_by_key(|r| r.index);
    Ok((first, reps))
}

/// Pools repetitions of results sharing one configuration, in repetition
/// order, and compares every condition with its reference interval.
pub fn aggregate(results: &[ExperimentResult]) -> Result<Vec<SummaryRow>, HarnessError> {
    let (head, reps) = merge(results)?;
    let cfg = &head.config;
    let level = cfg.level;
    let mut rows = Vec::new();
    for (ci, cond) in head.conditions.iter().enumerate() {
        for (mi, &metric) in cfg.metrics.iter().enumerate() {
            let reference_of = |rep: &RepetitionResult| -> MetricRecord {
                match cond.reference {
                    Reference::Baseline => rep.baseline[mi].clone(),
                    Reference::Condition(j) => rep.conditions[j][mi].clone(),
                }
            };
            let reference: Vec<f64> = reps
                .iter()
                .flat_map(|r| reference_of(r).values().collect::<Vec<_>>())
                .collect();
            let records: Vec<&MetricRecord> = reps.iter().map(|r| &r.conditions[ci][mi]).collect();
            let values: Vec<f64> = records.iter().flat_map(|r| r.values()).collect();
            let n_skipped = records
                .iter()
                .map(|r| {
                    if r.is_skipped() {
                        1
                    } else {
                        r.n_uncomputable()
                    }
                })
                .sum();
            let baseline_interval =
                (!reference.is_empty()).then(|| stats::percentile_interval(&reference, level));
            let report = baseline_interval.and_then(|b| {
                let uncomputable = records.iter().map(|r| r.n_uncomputable()).sum();
                compare(b, &values, uncomputable, level).ok()
            });
            let mut outcome_counts = [0; 4];
            if let Some(b) = baseline_interval {
                let base_cfg = classify_configuration(&b).expect("ordered interval");
                for r in &records {
                    let v: Vec<f64> = r.values().collect();
                    if !v.is_empty() {
                        let c = classify_configuration(&stats::percentile_interval(&v, level))
                            .expect("ordered interval");
                        outcome_counts[outcome_index(classify_outcome(base_cfg, c))] += 1;
                    }
                }
            }
            let sorted = stats::sorted(&values);
            rows.push(SummaryRow {
                scenario: cfg.scenario.to_string(),
                experiment: cond.experiment.clone(),
                condition: cond.condition.clone(),
                metric,
                disparity_mode: cfg.disparity_mode.label().to_string(),
                baseline_interval,
                report,
                n_values: values.len(),
                n_skipped,
                median: (!sorted.is_empty()).then(|| stats::quantile_sorted(&sorted, 0.5)),
                quartiles: (!sorted.is_empty()).then(|| {
                    (
                        stats::quantile_sorted(&sorted, 0.25),
                        stats::quantile_sorted(&sorted, 0.75),
                    )
                }),
                outcome_counts,
            });
        }
    }
    Ok(rows)
}

/// Share of repetition records that were skipped outright.
pub fn skipped_fraction(result: &ExperimentResult) -> f64 {
    let n = result.n_records();
    if n == 0 {
        0.0
    } else {
        result.n_skipped_records() as f64 / n as f64
    }
}

struct RowWriter<'a, W: Write> {
    wtr: csv::Writer<W>,
    scenario: String,
    mode: &'a str,
}

impl<W: Write> RowWriter<'_, W> {
    fn record(
        &mut self,
        experiment: &str,
        condition: &str,
        rep: usize,
        metric: Metric,
        rec: &MetricRecord,
    ) -> Result<(), csv::Error> {
        let rep = rep.to_string();
        let mut row = |value: Option<f64>, kind: &str, reason: &str| {
            let value = value.map(|v| v.to_string()).unwrap_or_default();
            let skipped = if reason.is_empty() { "false" } else { "true" };
            self.wtr.write_record([
                self.scenario.as_str(),
                experiment,
                condition,
                rep.as_str(),
                metric.name(),
                self.mode,
                value.as_str(),
                kind,
                skipped,
                reason,
            ])
        };
        match rec {
            MetricRecord::Skipped(reason) => row(None, "point", reason),
            MetricRecord::Computed { point, draws } => {
                row(
                    *point,
                    "point",
                    if point.is_some() {
                        ""
                    } else {
                        "undefined point estimate"
                    },
                )?;
                for d in draws {
                    row(
                        *d,
                        "bootstrap",
                        if d.is_some() {
                            ""
                        } else {
                            "uncomputable resample"
                        },
                    )?;
                }
                Ok(())
            }
        }
    }
}

/// Long-format values: the baseline first, then each condition, per
/// repetition.
pub fn write_results<W: Write>(result: &ExperimentResult, writer: W) -> Result<(), HarnessError> {
    let cfg = &result.config;
    let mut w = RowWriter {
        wtr: csv::Writer::from_writer(writer),
        scenario: cfg.scenario.to_string(),
        mode: cfg.disparity_mode.label(),
    };
    w.wtr.write_record(RESULTS_HEADER)?;
    let mut reps: Vec<&RepetitionResult> = result.repetitions.iter().collect();
    reps.sort_by_key(|r| r.index);
    for rep in reps {
        for (mi, &metric) in cfg.metrics.iter().enumerate() {
            w.record("baseline", "none", rep.index, metric, &rep.baseline[mi])?;
        }
        for (ci, cond) in result.conditions.iter().enumerate() {
            for (mi, &metric) in cfg.metrics.iter().enumerate() {
                w.record(
                    &cond.experiment,
                    &cond.condition,
                    rep.index,
                    metric,
                    &rep.conditions[ci][mi],
                )?;
            }
        }
    }
    w.wtr.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], writer: W) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let rep = r.report.as_ref();
        let base_cfg = r
            .baseline_interval
            .map(|b| {
                classify_configuration(&b)
                    .expect("ordered interval")
                    .label()
                    .to_string()
            })
            .unwrap_or_default();
        wtr.write_record([
            r.scenario.clone(),
            r.experiment.clone(),
            r.condition.clone(),
            r.metric.name().to_string(),
            r.disparity_mode.clone(),
            opt(r.baseline_interval.map(|b| b.lower)),
            opt(r.baseline_interval.map(|b| b.upper)),
            base_cfg,
            rep.map(|x| x.experiment_config.label().to_string())
                .unwrap_or_default(),
            rep.map(|x| x.outcome.label().to_string())
                .unwrap_or_default(),
            opt(rep.map(|x| x.overlap_proportion)),
            r.n_values.to_string(),
            r.n_skipped.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Seeds, hash and per-repetition log lines. Timestamps are supplied by the
/// caller so the rest of the file stays reproducible.
pub fn write_provenance<W: Write>(
    result: &ExperimentResult,
    timestamps: &[(&str, u64)],
    mut out: W,
) -> std::io::Result<()> {
    let cfg = &result.config;
    writeln!(out, "config_hash: {}", result.config_hash)?;
    writeln!(out, "master_seed: {}", cfg.master_seed)?;
    writeln!(out, "scenario: {}", cfg.scenario)?;
    writeln!(out, "disparity_mode: {}", cfg.disparity_mode.label())?;
    writeln!(out, "model_class: {}", cfg.model.class.label())?;
    writeln!(out, "repetitions: {}", cfg.repetitions)?;
    writeln!(out, "bootstrap_B: {}", cfg.bootstrap_b)?;
    writeln!(out, "records: {}", result.n_records())?;
    writeln!(out, "skipped_records: {}", result.n_skipped_records())?;
    for (name, t) in timestamps {
        writeln!(out, "{name}_unix: {t}")?;
    }
    let mut reps: Vec<&RepetitionResult> = result.repetitions.iter().collect();
    reps.sort_by_key(|r| r.index);
    for rep in reps {
        for line in &rep.log {
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Md,
}

fn read_rows(path: &Path) -> Result<Vec<BTreeMap<String, String>>, HarnessError> {
    if !path.is_file() {
        return Err(HarnessError::MissingResults(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect(),
        );
    }
    Ok(out)
}

fn ordered_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// Per-experiment overlap tables (rows: disparity mode x metric, columns:
/// conditions) rendered from `summary.csv` in `dir`. Returns the files
/// written.
pub fn write_report(dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, HarnessError> {
    let summary = read_rows(&dir.join("summary.csv"))?;
    if summary.is_empty() {
        return Err(HarnessError::MissingResults(dir.join("summary.csv")));
    }
    let get = |r: &BTreeMap<String, String>, k: &str| r.get(k).cloned().unwrap_or_default();
    let experiments = ordered_unique(summary.iter().map(|r| r["experiment"].as_str()));
    let mut written = Vec::new();
    let mut md = String::new();
    for exp in experiments {
        let rows: Vec<&BTreeMap<String, String>> =
            summary.iter().filter(|r| r["experiment"] == exp).collect();
        let conditions = ordered_unique(rows.iter().map(|r| r["condition"].as_str()));
        let keys = ordered_unique(rows.iter().map(|r| r["disparity_mode"].as_str()));
        let metrics = ordered_unique(rows.iter().map(|r| r["metric"].as_str()));
        let mut header = vec![
            "scenario".to_string(),
            "disparity_mode".into(),
            "metric".into(),
        ];
        header.extend(conditions.iter().map(|c| c.to_string()));
        let mut body: Vec<Vec<String>> = Vec::new();
        for mode in &keys {
            for metric in &metrics {
                let scenario = rows
                    .iter()
                    .find(|r| r["disparity_mode"] == *mode)
                    .map(|r| get(r, "scenario"))
                    .unwrap_or_default();
                let mut line = vec![scenario, mode.to_string(), metric.to_string()];
                for cond in &conditions {
                    let cell = rows
                        .iter()
                        .find(|r| {
                            r["disparity_mode"] == *mode
                                && r["metric"] == *metric
                                && r["condition"] == *cond
                        })
                        .map(|r| get(r, "overlap_proportion"))
                        .unwrap_or_default();
                    let cell = match (format, cell.parse::<f64>()) {
                        (ReportFormat::Md, Ok(v)) => format!("{v:.2}"),
                        _ => cell,
                    };
                    line.push(cell);
                }
                body.push(line);
            }
        }
        match format {
            ReportFormat::Csv => {
                let path = dir.join(format!("report_{exp}.csv"));
                let mut wtr = csv::Writer::from_path(&path)?;
                wtr.write_record(&header)?;
                for line in &body {
                    wtr.write_record(line)?;
                }
                wtr.flush()?;
                written.push(path);
            }
            ReportFormat::Md => {
                md.push_str(&format!(
                    "## {exp}\n\nProportion of values within the baseline interval.\n\n"
                ));
                md.push_str(&format!("| {} |\n", header.join(" | ")));
                md.push_str(&format!("|{}\n", "---|".repeat(header.len())));
                for line in &body {
                    md.push_str(&format!("| {} |\n", line.join(" | ")));
                }
                md.push('\n');
            }
        }
    }
    if format == ReportFormat::Md {
        let path = dir.join("report.md");
        fs::write(&path, md)?;
        written.push(path);
    }
    written.extend(write_plot_data(dir)?);
    Ok(written)
}

/// One long-format file per experiment with columns
/// `condition,metric,value,baseline_lower,baseline_upper`.
pub fn write_plot_data(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let summary = read_rows(&dir.join("summary.csv"))?;
    let results_path = dir.join("results.csv");
    if !results_path.is_file() {
        return Err(HarnessError::MissingResults(results_path));
    }
    let mut bounds: BTreeMap<(String, String, String, String), (String, String)> = BTreeMap::new();
    for r in &summary {
        bounds.insert(
            (
                r["experiment"].clone(),
                r["condition"].clone(),
                r["metric"].clone(),
                r["disparity_mode"].clone(),
            ),
            (r["baseline_lower"].clone(), r["baseline_upper"].clone()),
        );
    }
    let mut writers: BTreeMap<String, csv::Writer<fs::File>> = BTreeMap::new();
    let mut paths = Vec::new();
    let mut rdr = csv::Reader::from_path(&results_path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .expect("results header")
    };
    let (ie, ic, im, id, iv, ik, is) = (
        col("experiment"),
        col("condition"),
        col("metric"),
        col("disparity_mode"),
        col("value"),
        col("kind"),
        col("skipped"),
    );
    for rec in rdr.records() {
        let rec = rec?;
        if &rec[ik] != "bootstrap" || &rec[is] == "true" {
            continue;
        }
        let key = (
            rec[ie].to_string(),
            rec[ic].to_string(),
            rec[im].to_string(),
            rec[id].to_string(),
        );
        let Some((lo, hi)) = bounds.get(&key) else {
            continue;
        };
        if !writers.contains_key(&key.0) {
            let path = dir.join(format!("plot_data_{}.csv", key.0));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record([
                "condition",
                "metric",
                "value",
                "baseline_lower",
                "baseline_upper",
            ])?;
            writers.insert(key.0.clone(), w);
            paths.push(path);
        }
        let w = writers.get_mut(&key.0).expect("inserted");
        w.write_record([&rec[ic], &rec[im], &rec[iv], lo.as_str(), hi.as_str()])?;
    }
    for w in writers.values_mut() {
        w.flush()?;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{plan, Condition, Scenario};
    use crate::reliability::IntervalConfiguration;

    fn result_with(values: Vec<Vec<f64>>, baseline: Vec<Vec<f64>>) -> ExperimentResult {
        let mut config = crate::harness::tests::small_config(Scenario::B);
        config.metrics = vec![Metric::Spd];
        config.grids.subsample = vec![0.5];
        let conditions: Vec<Condition> = plan(&config);
        let repetitions = values
            .into_iter()
            .zip(baseline)
            .enumerate()
            .map(|(i, (v, b))| RepetitionResult {
                index: i,
                baseline: vec![MetricRecord::Computed {
                    point: Some(0.0),
                    draws: b.into_iter().map(Some).collect(),
                }],
                conditions: vec![vec![MetricRecord::Computed {
                    point: Some(0.0),
                    draws: v.into_iter().map(Some).collect(),
                }]],
                log: vec![],
            })
            .collect();
        ExperimentResult {
            config_hash: config.hash(),
            config,
            conditions,
            repetitions,
        }
    }

    #[test]
    fn pooled_overlap_uses_the_value_multiset() {
        let base: Vec<f64> = (0..=100)
            .map(|i| -0.1 + 0.2 * f64::from(i) / 100.0)
            .collect();
        // 2 of 5 inside in the first repetition, 3 of 5 in the second
        let r = result_with(
            vec![
                vec![0.0, 0.05, 0.5, 0.6, 0.7],
                vec![0.0, 0.01, 0.02, 0.9, 0.8],
            ],
            vec![base.clone(), base],
        );
        let rows = aggregate(&[r]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].report.as_ref().unwrap().overlap_proportion - 0.5).abs() < 1e-12);
        assert_eq!(rows[0].n_values, 10);
    }

    #[test]
    fn single_repetition_matches_its_report() {
        let base: Vec<f64> = (0..50).map(|i| 0.1 + f64::from(i) / 1000.0).collect();
        let vals = vec![0.12, 0.13, 0.2, 0.11];
        let r = result_with(vec![vals.clone()], vec![base.clone()]);
        let row = &aggregate(&[r]).unwrap()[0];
        let direct = compare(stats::percentile_interval(&base, 0.95), &vals, 0, 0.95).unwrap();
        assert_eq!(row.report.as_ref().unwrap(), &direct);
        assert_eq!(
            direct.baseline_config,
            IntervalConfiguration::PositiveDisparity
        );
        assert_eq!(row.outcome_counts, [1, 0, 0, 0]);
    }

    #[test]
    fn mixed_configs_are_rejected() {
        let a = result_with(vec![vec![0.0]], vec![vec![0.0]]);
        let mut b = a.clone();
        b.config_hash = "other".into();
        assert!(matches!(
            aggregate(&[a, b]),
            Err(HarnessError::MixedConfigs(..))
        ));
        assert!(matches!(aggregate(&[]), Err(HarnessError::NoResults)));
    }

    #[test]
    fn split_results_pool_like_a_single_run() {
        let a = result_with(
            vec![vec![0.1, 0.2], vec![0.3]],
            vec![vec![0.0, 0.2], vec![0.1]],
        );
        let mut first = a.clone();
        first.repetitions.truncate(1);
        let mut second = a.clone();
        second.repetitions.remove(0);
        assert_eq!(
            aggregate(&[second, first]).unwrap(),
            aggregate(&[a]).unwrap()
        );
    }

    #[test]
    fn results_layout() {
        let mut r = result_with(vec![vec![0.1, 0.2]], vec![vec![0.0, 0.3]]);
        r.repetitions[0].conditions[0][0] = MetricRecord::Skipped("boom".into());
        let mut buf = Vec::new();
        write_results(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER.join(","));
        assert_eq!(lines[1], "B,baseline,none,0,SPD,natural,0,point,false,");
        assert_eq!(lines[2], "B,baseline,none,0,SPD,natural,0,bootstrap,false,");
        assert_eq!(lines[4], "B,subsample,0.5,0,SPD,natural,,point,true,boom");
        assert_eq!(lines.len(), 5);
    }
}
