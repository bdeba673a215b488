//! In-house binary classifiers: logistic regression, boosted stumps, and an
//! output-perturbed differentially private logistic regression.

pub mod encode;
mod importance;
pub mod logistic;
pub mod stumps;

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{sigmoid, DataTable};
use crate::seed;

use encode::{Encoder, Matrix, Scaling};
use logistic::LogisticOptions;
use stumps::StumpEnsemble;

pub use importance::{feature_importance, ImportanceRanking, IMPORTANCE_SHUFFLES};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training table is empty")]
    EmptyTable,
    #[error("dp_logistic_regression needs l2 > 0, got {0}")]
    NonPositiveL2(f64),
    #[error("at least {needed} rows required, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    LogisticRegression,
    BoostedStumps,
    DpLogisticRegression,
}

impl ModelClass {
    pub fn label(&self) -> &'static str {
        match self {
            ModelClass::LogisticRegression => "logistic_regression",
            ModelClass::BoostedStumps => "boosted_stumps",
            ModelClass::DpLogisticRegression => "dp_logistic_regression",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationPolicy {
    #[default]
    MeanMode,
    Zero,
}

fn default_learning_rate() -> f64 {
    1.0
}
fn default_epochs() -> usize {
    200
}
fn default_n_stumps() -> usize {
    100
}
fn default_l2() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub class: ModelClass,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_n_stumps")]
    pub n_stumps: usize,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default)]
    pub dp_epsilon: Option<f64>,
    #[serde(default)]
    pub imputation_policy: ImputationPolicy,
}

impl ModelSpec {
    pub fn new(class: ModelClass) -> Self {
        Self {
            class,
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            n_stumps: default_n_stumps(),
            l2: default_l2(),
            dp_epsilon: None,
            imputation_policy: ImputationPolicy::MeanMode,
        }
    }

    pub fn dp(epsilon: f64, l2: f64) -> Self {
        Self {
            dp_epsilon: Some(epsilon),
            l2,
            ..Self::new(ModelClass::DpLogisticRegression)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.n_stumps == 0 {
            return bad("n_stumps must be positive".into());
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be >= 0, got {}", self.l2));
        }
        match (self.class, self.dp_epsilon) {
            (ModelClass::DpLogisticRegression, Some(e)) if e > 0.0 => {
                if self.l2 <= 0.0 {
                    return Err(ModelError::NonPositiveL2(self.l2));
                }
                Ok(())
            }
            (ModelClass::DpLogisticRegression, _) => {
                bad("dp_epsilon > 0 is required for dp_logistic_regression".into())
            }
            (_, Some(_)) => bad("dp_epsilon is only valid for dp_logistic_regression".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic { weights: Vec<f64>, bias: f64 },
    Stumps(StumpEnsemble),
    Constant { positive: bool },
}

/// A fitted classifier. Immutable once trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub encoder: Encoder,
    pub params: ModelParams,
    /// Set when training saw a single class and fell back to a constant.
    pub degenerate: bool,
}

impl TrainedModel {
    pub fn feature_names(&self) -> Vec<&str> {
        self.encoder.feature_names()
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Logistic { weights, bias } => {
                row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias
            }
            ModelParams::Stumps(e) => e.score(row),
            ModelParams::Constant { positive } => {
                if *positive {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub(crate) fn probabilities_encoded(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows)
            .map(|i| sigmoid(self.score_row(x.row(i))))
            .collect()
    }

    pub(crate) fn labels_encoded(&self, x: &Matrix) -> Vec<bool> {
        self.probabilities_encoded(x)
            .into_iter()
            .map(|p| p >= 0.5)
            .collect()
    }

    pub fn predict_proba(&self, table: &DataTable) -> Vec<f64> {
        self.probabilities_encoded(&self.encoder.encode(table))
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(model.format_version));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Predicted labels (threshold 0.5) written into a copy of `table`.
pub fn predict(model: &TrainedModel, table: &DataTable) -> DataTable {
    let labels = model.labels_encoded(&model.encoder.encode(table));
    table
        .clone()
        .with_predictions(labels)
        .expect("one label per row")
}

fn single_class(table: &DataTable) -> Option<bool> {
    let y = table.targets();
    let first = *y.first()?;
    y.iter().all(|&v| v == first).then_some(first)
}

fn constant_model(spec: &ModelSpec, encoder: Encoder, positive: bool) -> TrainedModel {
    TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        encoder,
        params: ModelParams::Constant { positive },
        degenerate: true,
    }
}

/// Trains the model described by `spec`. Predictions in `table` are ignored.
pub fn train(
    spec: &ModelSpec,
    table: &DataTable,
    seed_value: u64,
) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    if table.is_empty() {
        return Err(ModelError::EmptyTable);
    }
    match spec.class {
        ModelClass::DpLogisticRegression => train_dp(spec, table, seed_value),
        ModelClass::LogisticRegression => {
            let encoder = Encoder::fit(table, Scaling::Standard, spec.imputation_policy);
            if let Some(c) = single_class(table) {
                return Ok(constant_model(spec, encoder, c));
            }
            let x = encoder.encode(table);
            let fit = logistic::fit(
                &x,
                table.targets(),
                &LogisticOptions {
                    learning_rate: spec.learning_rate,
                    epochs: spec.epochs,
                    l2: spec.l2,
                    fit_intercept: true,
                },
            );
            Ok(TrainedModel {
                format_version: MODEL_FORMAT_VERSION,
                spec: spec.clone(),
                encoder,
                params: ModelParams::Logistic {
                    weights: fit.weights,
                    bias: fit.bias,
                },
                degenerate: false,
            })
        }
        ModelClass::BoostedStumps => {
            let encoder = Encoder::fit(table, Scaling::Standard, spec.imputation_policy);
            if let Some(c) = single_class(table) {
                return Ok(constant_model(spec, encoder, c));
            }
            let x = encoder.encode(table);
            let ensemble = stumps::fit(
                &x,
                table.targets(),
                spec.n_stumps,
                spec.learning_rate,
                spec.l2,
            );
            Ok(TrainedModel {
                format_version: MODEL_FORMAT_VERSION,
                spec: spec.clone(),
                encoder,
                params: ModelParams::Stumps(ensemble),
                degenerate: false,
            })
        }
    }
}

/// Encoder whose rows have Euclidean norm at most 1: features min-max scaled
/// to [-1, 1], a constant intercept column, everything divided by
/// `sqrt(width)`.
fn dp_encoder(table: &DataTable, imputation: ImputationPolicy) -> Encoder {
    let mut encoder = Encoder::fit(table, Scaling::MinMax, imputation);
    encoder.intercept_column = true;
    encoder.row_scale = encoder.unit_row_scale();
    encoder
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-10;

/// The noise-free minimizer that [`train_dp`] perturbs. Solved exactly, since
/// the noise scale assumes the true minimizer.
pub(crate) fn fit_dp_objective(
    spec: &ModelSpec,
    table: &DataTable,
) -> (Encoder, Option<Vec<f64>>, Option<bool>) {
    let encoder = dp_encoder(table, spec.imputation_policy);
    if let Some(c) = single_class(table) {
        return (encoder, None, Some(c));
    }
    let x = encoder.encode(table);
    let fit = logistic::fit_newton(&x, table.targets(), spec.l2, NEWTON_MAX_ITER, NEWTON_TOL);
    (encoder, Some(fit.weights), None)
}

/// Adds noise with density proportional to `exp(-epsilon * |b| / beta)`,
/// where `beta = 2 / (n * l2)` bounds the L2 sensitivity of the minimizer:
/// a uniform direction scaled by a Gamma(d, beta / epsilon) norm.
pub(crate) fn perturb_weights(
    weights: &[f64],
    n: usize,
    l2: f64,
    epsilon: f64,
    seed_value: u64,
) -> Vec<f64> {
    let scale = 2.0 / (n as f64 * l2 * epsilon);
    let mut rng = seed::rng(seed::derive(seed_value, "dp-weights", 0));
    let norm = Gamma::new(weights.len() as f64, scale)
        .expect("positive shape and scale")
        .sample(&mut rng);
    let direction: Vec<f64> = loop {
        let v: Vec<f64> = weights
            .iter()
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let len = v.iter().map(|z| z * z).sum::<f64>().sqrt();
        if len > 0.0 {
            break v.into_iter().map(|z| z / len).collect();
        }
    };
    weights
        .iter()
        .zip(direction)
        .map(|(w, u)| w + norm * u)
        .collect()
}

/// Output-perturbed L2-regularized logistic regression.
pub fn train_dp(
    spec: &ModelSpec,
    table: &DataTable,
    seed_value: u64,
) -> Result<TrainedModel, ModelError> {
    if spec.class != ModelClass::DpLogisticRegression {
        return Err(ModelError::InvalidSpec(
            "train_dp needs class dp_logistic_regression".into(),
        ));
    }
    spec.validate()?;
    if table.is_empty() {
        return Err(ModelError::EmptyTable);
    }
    let epsilon = spec.dp_epsilon.expect("validated");
    let (encoder, weights, constant) = fit_dp_objective(spec, table);
    if let Some(c) = constant {
        return Ok(constant_model(spec, encoder, c));
    }
    let weights = perturb_weights(
        &weights.expect("fitted"),
        table.n_rows(),
        spec.l2,
        epsilon,
        seed_value,
    );
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        encoder,
        params: ModelParams::Logistic { weights, bias: 0.0 },
        degenerate: false,
    })
}

/// Fraction of rows whose predicted label matches the target.
pub fn accuracy(model: &TrainedModel, table: &DataTable) -> f64 {
    let labels = model.labels_encoded(&model.encoder.encode(table));
    let hits = labels
        .iter()
        .zip(table.targets())
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / table.n_rows() as f64
}
