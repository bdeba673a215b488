//! Permutation feature importance.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::DataTable;
use crate::seed;

use super::{ModelError, TrainedModel};

pub const IMPORTANCE_SHUFFLES: usize = 5;
const MIN_ROWS: usize = 20;

/// Features ordered from weakest to strongest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<(String, f64)>,
}

impl ImportanceRanking {
    pub fn weakest(&self, k: usize) -> Vec<&str> {
        self.entries
            .iter()
            .take(k)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn strongest(&self, k: usize) -> Vec<&str> {
        self.entries
            .iter()
            .rev()
            .take(k)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }
}

fn accuracy(pred: &[bool], y: &[bool]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Mean drop in accuracy over [`IMPORTANCE_SHUFFLES`] shuffles of each
/// feature, floored at zero. Ties keep the model's feature order.
pub fn feature_importance(
    model: &TrainedModel,
    table: &DataTable,
    seed_value: u64,
) -> Result<ImportanceRanking, ModelError> {
    let n = table.n_rows();
    if n < MIN_ROWS {
        return Err(ModelError::TooFewRows {
            needed: MIN_ROWS,
            got: n,
        });
    }
    let x = model.encoder.encode(table);
    let y = table.targets();
    let base = accuracy(&model.labels_encoded(&x), y);
    let names = model.encoder.feature_names();
    let mut entries: Vec<(String, f64)> = Vec::with_capacity(names.len());
    for (f, block) in model.encoder.blocks().into_iter().enumerate() {
        let mut rng = seed::rng(seed::derive(seed_value, "importance", f as u64));
        let mut drops = 0.0;
        for _ in 0..IMPORTANCE_SHUFFLES {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut shuffled = x.clone();
            for (i, &src) in order.iter().enumerate() {
                for c in block.clone() {
                    shuffled.data[i * x.cols + c] = x.data[src * x.cols + c];
                }
            }
            drops += base - accuracy(&model.labels_encoded(&shuffled), y);
        }
        entries.push((
            names[f].to_string(),
            (drops / IMPORTANCE_SHUFFLES as f64).max(0.0),
        ));
    }
    entries.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(ImportanceRanking { entries })
}
