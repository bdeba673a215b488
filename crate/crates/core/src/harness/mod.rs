//! End-to-end audit simulation: baseline audit, degraded audits under the
//! three access scenarios, and aggregation into reliability summaries.

pub mod config;
mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{split, DataError, DataTable, SplitSpec};
use crate::degrade::{skew_disparity, DegradationSpec, SKEW_SHARE};
use crate::metrics::{
    confusion_by_group, parity_value, resample_confusions, BootstrapConfig, GroupedConfusion,
    Metric,
};
use crate::models::{feature_importance, predict, train, ImportanceRanking, ModelSpec};
use crate::privacy::{
    laplace_release, metric_from_noisy, postprocess, LaplaceParams, NoisyGroupedConfusion,
    PostProcessing,
};
use crate::seed;
use crate::synth::{self, SynthesizerSpec};

pub use config::{ConfigError, DatasetSource, DisparityMode, ExperimentConfig, Grids, Scenario};
pub use output::{
    aggregate, skipped_fraction, write_plot_data, write_provenance, write_report, write_results,
    write_summary, ReportFormat, SummaryRow, RESULTS_HEADER, SUMMARY_HEADER,
};

/// Share of each split used to train; the rest is audited.
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("results come from different configurations ({0} and {1})")]
    MixedConfigs(String, String),
    #[error("no results to aggregate")]
    NoResults,
    #[error("missing results file {0}")]
    MissingResults(std::path::PathBuf),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Values of one metric for one condition in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricRecord {
    /// `None` marks an uncomputable point or resample.
    Computed {
        point: Option<f64>,
        draws: Vec<Option<f64>>,
    },
    Skipped(String),
}

impl MetricRecord {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let draws: &[Option<f64>] = match self {
            MetricRecord::Computed { draws, .. } => draws,
            MetricRecord::Skipped(_) => &[],
        };
        draws.iter().flatten().copied()
    }

    pub fn n_uncomputable(&self) -> usize {
        match self {
            MetricRecord::Computed { draws, .. } => draws.iter().filter(|d| d.is_none()).count(),
            MetricRecord::Skipped(_) => 0,
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self, MetricRecord::Skipped(_))
    }
}

/// Which pooled values define the reference interval of a condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reference {
    Baseline,
    /// Another condition, by index in the plan.
    Condition(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum ConditionKind {
    Identity,
    Degrade(DegradationSpec),
    Synthesize(SynthesizerSpec),
    /// Laplace release of the audit table, or of the subsample produced by
    /// the condition at `level`.
    Dp {
        level: Option<usize>,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub experiment: String,
    pub condition: String,
    pub reference: Reference,
    kind: ConditionKind,
}

impl Condition {
    fn tag(&self) -> String {
        format!("{}:{}", self.experiment, self.condition)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionResult {
    pub index: usize,
    /// One record per configured metric.
    pub baseline: Vec<MetricRecord>,
    /// `conditions[c][m]` for condition `c` and metric `m`.
    pub conditions: Vec<Vec<MetricRecord>>,
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub conditions: Vec<Condition>,
    pub repetitions: Vec<RepetitionResult>,
}

impl ExperimentResult {
    /// Computable values of one condition and metric pooled over
    /// repetitions in index order. `("baseline", "none")` selects the
    /// baseline audit.
    pub fn pooled_values(
        &self,
        experiment: &str,
        condition: &str,
        metric: Metric,
    ) -> Option<Vec<f64>> {
        let m = self.config.metrics.iter().position(|&x| x == metric)?;
        let c = if experiment == "baseline" && condition == "none" {
            None
        } else {
            Some(
                self.conditions
                    .iter()
                    .position(|c| c.experiment == experiment && c.condition == condition)?,
            )
        };
        let mut reps: Vec<&RepetitionResult> = self.repetitions.iter().collect();
        reps.sort_by_key(|r| r.index);
        Some(
            reps.iter()
                .flat_map(|r| {
                    let rec = match c {
                        None => &r.baseline[m],
                        Some(c) => &r.conditions[c][m],
                    };
                    rec.values().collect::<Vec<_>>()
                })
                .collect(),
        )
    }

    pub fn n_records(&self) -> usize {
        self.repetitions
            .iter()
            .map(|r| r.baseline.len() + r.conditions.iter().map(Vec::len).sum::<usize>())
            .sum()
    }

    pub fn n_skipped_records(&self) -> usize {
        self.repetitions
            .iter()
            .map(|r| {
                r.baseline.iter().filter(|m| m.is_skipped()).count()
                    + r.conditions
                        .iter()
                        .flatten()
                        .filter(|m| m.is_skipped())
                        .count()
            })
            .sum()
    }
}

fn subsample_spec(s: f64) -> DegradationSpec {
    if s <= 1.0 {
        DegradationSpec::Subsample { fraction: s }
    } else {
        DegradationSpec::SubsampleRows { rows: s as usize }
    }
}

/// Conditions in output order.
pub fn plan(config: &ExperimentConfig) -> Vec<Condition> {
    let g = &config.grids;
    let mut out = Vec::new();
    if g.is_empty() {
        out.push(Condition {
            experiment: "identity".into(),
            condition: "none".into(),
            reference: Reference::Baseline,
            kind: ConditionKind::Identity,
        });
        return out;
    }
    let mut push =
        |experiment: &str, condition: String, kind: ConditionKind, reference: Reference| {
            out.push(Condition {
                experiment: experiment.into(),
                condition,
                reference,
                kind,
            });
            out.len() - 1
        };
    let levels: Vec<(usize, String)> = g
        .subsample
        .iter()
        .map(|&s| {
            let idx = push(
                "subsample",
                s.to_string(),
                ConditionKind::Degrade(subsample_spec(s)),
                Reference::Baseline,
            );
            (idx, s.to_string())
        })
        .collect();
    for &k in &g.features {
        push(
            "features_weakest",
            k.to_string(),
            ConditionKind::Degrade(DegradationSpec::DropWeakestFeatures { count: k }),
            Reference::Baseline,
        );
    }
    for &k in &g.features_strongest {
        push(
            "features_strongest",
            k.to_string(),
            ConditionKind::Degrade(DegradationSpec::DropStrongestFeatures { count: k }),
            Reference::Baseline,
        );
    }
    for &r in &g.missingness {
        push(
            "missingness",
            r.to_string(),
            ConditionKind::Degrade(DegradationSpec::DisparateMissingness { rate: r }),
            Reference::Baseline,
        );
    }
    for s in &g.synthesizers {
        push(
            "synthesizer",
            s.label(),
            ConditionKind::Synthesize(*s),
            Reference::Baseline,
        );
    }
    for &e in &g.epsilon {
        push(
            "dp",
            format!("eps={e}"),
            ConditionKind::Dp {
                level: None,
                epsilon: e,
            },
            Reference::Baseline,
        );
    }
    for (idx, label) in &levels {
        for &e in &g.epsilon {
            push(
                "dp",
                format!("n={label};eps={e}"),
                ConditionKind::Dp {
                    level: Some(*idx),
                    epsilon: e,
                },
                Reference::Condition(*idx),
            );
        }
    }
    out
}

struct Resampled {
    full: GroupedConfusion<u64>,
    draws: Vec<GroupedConfusion<u64>>,
}

fn resample(table: &DataTable, b: usize, seed_value: u64) -> Result<Resampled, String> {
    let full = confusion_by_group(table).map_err(|e| e.to_string())?;
    let draws = resample_confusions(table, b, seed_value).map_err(|e| e.to_string())?;
    Ok(Resampled { full, draws })
}

fn plain_records(r: &Resampled, metrics: &[Metric]) -> Vec<MetricRecord> {
    metrics
        .iter()
        .map(|&m| {
            let draws: Vec<Option<f64>> = r
                .draws
                .iter()
                .map(|g| parity_value(&g.convert::<f64>(), m).ok())
                .collect();
            let dropped = draws.iter().filter(|d| d.is_none()).count();
            if dropped as f64 > BootstrapConfig::MAX_DEGENERATE * draws.len() as f64 {
                return MetricRecord::Skipped(format!(
                    "too many degenerate resamples ({dropped} of {})",
                    draws.len()
                ));
            }
            MetricRecord::Computed {
                point: parity_value(&r.full.convert::<f64>(), m).ok(),
                draws,
            }
        })
        .collect()
}

fn noisy_metrics(
    counts: &GroupedConfusion<u64>,
    metrics: &[Metric],
    epsilon: f64,
    noise_seed: u64,
    policy: PostProcessing,
) -> Vec<Option<f64>> {
    let params = LaplaceParams::new(epsilon, noise_seed).expect("validated epsilon");
    let noisy: NoisyGroupedConfusion<f64> = postprocess(&laplace_release(counts, params), policy);
    metrics
        .iter()
        .map(|&m| metric_from_noisy(&noisy, m).ok().map(|e| e.value))
        .collect()
}

/// One fresh Laplace release per bootstrap resample.
fn dp_records(
    r: &Resampled,
    metrics: &[Metric],
    epsilon: f64,
    noise_seed: u64,
    policy: PostProcessing,
) -> Vec<MetricRecord> {
    let per_draw: Vec<Vec<Option<f64>>> = r
        .draws
        .par_iter()
        .enumerate()
        .map(|(b, g)| {
            noisy_metrics(
                g,
                metrics,
                epsilon,
                seed::stream(noise_seed, b as u64),
                policy,
            )
        })
        .collect();
    let point = noisy_metrics(
        &r.full,
        metrics,
        epsilon,
        seed::derive(noise_seed, "point", 0),
        policy,
    );
    (0..metrics.len())
        .map(|m| MetricRecord::Computed {
            point: point[m],
            draws: per_draw.iter().map(|d| d[m]).collect(),
        })
        .collect()
}

fn skipped(metrics: &[Metric], reason: &str) -> Vec<MetricRecord> {
    metrics
        .iter()
        .map(|_| MetricRecord::Skipped(reason.to_string()))
        .collect()
}

/// Retrains a model from its specification alone on 70% of `table` and
/// predicts the remaining 30%.
fn replicate(spec: &ModelSpec, table: &DataTable, seed_value: u64) -> Result<DataTable, String> {
    let (fit_part, audit_part) = split(
        table,
        SplitSpec::new(TRAIN_FRACTION, seed::derive(seed_value, "replica-split", 0))
            .expect("valid fraction"),
    )
    .map_err(|e| e.to_string())?;
    let replica = train(
        spec,
        &fit_part,
        seed::derive(seed_value, "replica-train", 0),
    )
    .map_err(|e| e.to_string())?;
    Ok(predict(&replica, &audit_part))
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    table: &'a DataTable,
    plan: &'a [Condition],
    needs_ranking: bool,
}

fn run_repetition(ctx: &Context<'_>, rep: usize) -> RepetitionResult {
    let cfg = ctx.config;
    let metrics = &cfg.metrics;
    let master = cfg.master_seed;
    let r = rep as u64;
    let b = cfg.bootstrap_b;
    let mut log = Vec::new();
    let all_skipped = |reason: String, log: Vec<String>| RepetitionResult {
        index: rep,
        baseline: skipped(metrics, &reason),
        conditions: ctx.plan.iter().map(|_| skipped(metrics, &reason)).collect(),
        log,
    };

    let split_seed = seed::derive(master, "split", r);
    let train_seed = seed::derive(master, "train", r);
    log.push(format!(
        "rep {rep}: split_seed={split_seed} train_seed={train_seed}"
    ));
    let split_spec = SplitSpec::new(TRAIN_FRACTION, split_seed).expect("valid fraction");
    let (train_part, audit_part) = match split(ctx.table, split_spec) {
        Ok(parts) => parts,
        Err(e) => return all_skipped(e.to_string(), log),
    };
    let model = match train(&cfg.model, &train_part, train_seed) {
        Ok(m) => m,
        Err(e) => return all_skipped(e.to_string(), log),
    };
    if model.degenerate {
        log.push(format!(
            "rep {rep}: single-class training split, constant model"
        ));
    }
    let mut audit = predict(&model, &audit_part);
    if cfg.disparity_mode == DisparityMode::Skewed {
        match skew_disparity(&audit, SKEW_SHARE, seed::derive(master, "skew", r)) {
            Ok(t) => audit = t,
            Err(e) => return all_skipped(e.to_string(), log),
        }
    }

    let baseline_resamples = resample(&audit, b, seed::derive(master, "baseline", r));
    let baseline = match &baseline_resamples {
        Ok(res) => plain_records(res, metrics),
        Err(e) => skipped(metrics, e),
    };

    let ranking: Option<ImportanceRanking> = if ctx.needs_ranking {
        match feature_importance(&model, &train_part, seed::derive(master, "importance", r)) {
            Ok(rk) => Some(rk),
            Err(e) => {
                log.push(format!("rep {rep}: importance ranking unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };

    let mut level_resamples: Vec<Option<Resampled>> = Vec::with_capacity(ctx.plan.len());
    let mut conditions = Vec::with_capacity(ctx.plan.len());
    for c in ctx.plan {
        let s = seed::derive(master, &c.tag(), r);
        let boot_seed = seed::derive(s, "bootstrap", 0);
        let mut kept = None;
        let records = match (&c.kind, cfg.scenario) {
            (ConditionKind::Identity, Scenario::A | Scenario::B) => baseline.clone(),
            (ConditionKind::Dp { level, epsilon }, _) => {
                let source = match level {
                    None => baseline_resamples.as_ref().ok(),
                    Some(i) => level_resamples[*i].as_ref(),
                };
                match source {
                    Some(res) => dp_records(
                        res,
                        metrics,
                        *epsilon,
                        seed::derive(s, "noise", 0),
                        cfg.post_processing,
                    ),
                    None => skipped(metrics, "no confusion counts at this sample size"),
                }
            }
            (kind, scenario) => {
                let prepared = match kind {
                    ConditionKind::Identity => Ok(audit.clone()),
                    ConditionKind::Degrade(d) => d
                        .apply(&audit, ranking.as_ref(), s)
                        .map_err(|e| e.to_string()),
                    ConditionKind::Synthesize(spec) => {
                        synth::fit(spec, &audit.clone().without_predictions(), s)
                            .and_then(|f| f.sample(audit.n_rows(), seed::derive(s, "sample", 0)))
                            .map_err(|e| e.to_string())
                    }
                    _ => unreachable!(),
                };
                let audited = prepared.and_then(|t| match scenario {
                    Scenario::A => Ok(t),
                    Scenario::B => Ok(predict(&model, &t)),
                    Scenario::C => {
                        log.push(format!(
                            "rep {rep}: {} replica trained from model spec only (class={}), learned parameters not read",
                            c.tag(),
                            cfg.model.class.label()
                        ));
                        replicate(&cfg.model, &t, s)
                    }
                });
                match audited.and_then(|t| resample(&t, b, boot_seed)) {
                    Ok(res) => {
                        let recs = plain_records(&res, metrics);
                        kept = Some(res);
                        recs
                    }
                    Err(e) => skipped(metrics, &e),
                }
            }
        };
        level_resamples.push(kept);
        conditions.push(records);
    }
    RepetitionResult {
        index: rep,
        baseline,
        conditions,
        log,
    }
}

/// Runs every repetition of `config` on `table` with `jobs` worker threads.
/// The result does not depend on `jobs`.
pub fn run_experiment(
    config: &ExperimentConfig,
    table: &DataTable,
    jobs: usize,
) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let conditions = plan(config);
    let g = &config.grids;
    let ctx = Context {
        config,
        table,
        plan: &conditions,
        needs_ranking: !(g.features.is_empty()
            && g.features_strongest.is_empty()
            && g.missingness.is_empty()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let repetitions = pool.install(|| {
        (0..config.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(&ctx, rep))
            .collect()
    });
    Ok(ExperimentResult {
        config: config.clone(),
        config_hash: config.hash(),
        conditions,
        repetitions,
    })
}
