//! Feature encoding: imputation, scaling and one-hot expansion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Column, DataTable};

use super::ImputationPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `(x - mean) / sd`
    Standard,
    /// Training range mapped onto [-1, 1], clipped
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureEncoding {
    Numeric {
        name: String,
        /// Training mean of observed values.
        mean: f64,
        center: f64,
        scale: f64,
    },
    Categorical {
        name: String,
        /// One-hot order: first appearance in the training rows.
        levels: Vec<String>,
        /// Index of the most frequent training level.
        mode: Option<usize>,
    },
}

impl FeatureEncoding {
    pub fn name(&self) -> &str {
        match self {
            FeatureEncoding::Numeric { name, .. } | FeatureEncoding::Categorical { name, .. } => {
                name
            }
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureEncoding::Numeric { .. } => 1,
            FeatureEncoding::Categorical { levels, .. } => levels.len(),
        }
    }
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub features: Vec<FeatureEncoding>,
    pub scaling: Scaling,
    pub imputation: ImputationPolicy,
    /// Every encoded value is multiplied by this factor.
    pub row_scale: f64,
    /// Appends a constant column holding `row_scale` when set.
    pub intercept_column: bool,
}

impl Encoder {
    pub fn fit(table: &DataTable, scaling: Scaling, imputation: ImputationPolicy) -> Encoder {
        let features = table
            .schema()
            .feature_columns
            .iter()
            .zip(table.columns())
            .map(|(spec, col)| match col {
                Column::Numeric(values) => {
                    let observed: Vec<f64> = values.iter().flatten().copied().collect();
                    let mean = if observed.is_empty() {
                        0.0
                    } else {
                        observed.iter().sum::<f64>() / observed.len() as f64
                    };
                    let (center, scale) = match scaling {
                        Scaling::Standard => {
                            let var = if observed.len() > 1 {
                                observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                                    / observed.len() as f64
                            } else {
                                0.0
                            };
                            (mean, var.sqrt())
                        }
                        Scaling::MinMax => {
                            let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
                            let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                            if observed.is_empty() {
                                (0.0, 1.0)
                            } else {
                                (lo, hi - lo)
                            }
                        }
                    };
                    FeatureEncoding::Numeric {
                        name: spec.name.clone(),
                        mean,
                        center,
                        scale: if scale > 0.0 && scale.is_finite() {
                            scale
                        } else {
                            1.0
                        },
                    }
                }
                Column::Categorical { levels, codes } => {
                    let mut order: Vec<u32> = Vec::new();
                    let mut counts: Vec<usize> = Vec::new();
                    let mut seen: HashMap<u32, usize> = HashMap::new();
                    for &c in codes.iter().flatten() {
                        let slot = *seen.entry(c).or_insert_with(|| {
                            order.push(c);
                            counts.push(0);
                            order.len() - 1
                        });
                        counts[slot] += 1;
                    }
                    // first maximum wins ties
                    let mode = counts
                        .iter()
                        .enumerate()
                        .fold(None::<(usize, usize)>, |best, (i, &c)| match best {
                            Some((_, bc)) if bc >= c => best,
                            _ => Some((i, c)),
                        })
                        .map(|(i, _)| i);
                    FeatureEncoding::Categorical {
                        name: spec.name.clone(),
                        levels: order.iter().map(|&c| levels[c as usize].clone()).collect(),
                        mode,
                    }
                }
            })
            .collect();
        Encoder {
            features,
            scaling,
            imputation,
            row_scale: 1.0,
            intercept_column: false,
        }
    }

    /// Number of encoded columns, including the intercept column.
    pub fn width(&self) -> usize {
        self.features
            .iter()
            .map(FeatureEncoding::width)
            .sum::<usize>()
            + usize::from(self.intercept_column)
    }

    /// Row scale that bounds every encoded row to unit norm when numeric
    /// cells lie in [-1, 1]: each feature contributes at most 1 to the
    /// squared norm, as does the intercept column.
    pub fn unit_row_scale(&self) -> f64 {
        1.0 / ((self.features.len() + usize::from(self.intercept_column)) as f64).sqrt()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(FeatureEncoding::name).collect()
    }

    /// Column range of each feature in the encoded matrix.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.features
            .iter()
            .map(|f| {
                let r = start..start + f.width();
                start = r.end;
                r
            })
            .collect()
    }

    /// Encodes `table`. Features the table lacks are treated as entirely
    /// MISSING; categories unseen in training encode as all zeros.
    pub fn encode(&self, table: &DataTable) -> Matrix {
        let n = table.n_rows();
        let cols = self.width();
        let mut data = vec![0.0; n * cols];
        let mut offset = 0;
        for feat in &self.features {
            let column = table.column(feat.name()).filter(|c| match feat {
                FeatureEncoding::Numeric { .. } => matches!(c, Column::Numeric(_)),
                FeatureEncoding::Categorical { .. } => matches!(c, Column::Categorical { .. }),
            });
            match feat {
                FeatureEncoding::Numeric {
                    mean,
                    center,
                    scale,
                    ..
                } => {
                    let fill = match self.imputation {
                        ImputationPolicy::MeanMode => *mean,
                        ImputationPolicy::Zero => 0.0,
                    };
                    let values = match column {
                        Some(Column::Numeric(v)) => Some(v),
                        _ => None,
                    };
                    for i in 0..n {
                        let raw = values.and_then(|v| v[i]).unwrap_or(fill);
                        let mut x = (raw - center) / scale;
                        if self.scaling == Scaling::MinMax {
                            x = (2.0 * x - 1.0).clamp(-1.0, 1.0);
                        }
                        data[i * cols + offset] = x * self.row_scale;
                    }
                }
                FeatureEncoding::Categorical { levels, mode, .. } => {
                    let fill = match self.imputation {
                        ImputationPolicy::MeanMode => *mode,
                        ImputationPolicy::Zero => None,
                    };
                    let index: HashMap<&str, usize> = levels
                        .iter()
                        .enumerate()
                        .map(|(i, l)| (l.as_str(), i))
                        .collect();
                    let lookup: Option<(Vec<Option<usize>>, &Vec<Option<u32>>)> = match column {
                        Some(Column::Categorical { levels: tl, codes }) => Some((
                            tl.iter().map(|l| index.get(l.as_str()).copied()).collect(),
                            codes,
                        )),
                        _ => None,
                    };
                    for i in 0..n {
                        let slot = match &lookup {
                            Some((map, codes)) => match codes[i] {
                                Some(c) => map[c as usize],
                                None => fill,
                            },
                            None => fill,
                        };
                        if let Some(s) = slot {
                            data[i * cols + offset + s] = self.row_scale;
                        }
                    }
                }
            }
            offset += feat.width();
        }
        if self.intercept_column {
            for i in 0..n {
                data[i * cols + offset] = self.row_scale;
            }
        }
        Matrix {
            rows: n,
            cols,
            data,
        }
    }
}
