//! Tabular synthesizers: independent marginals, a Gaussian copula, and a
//! differentially private chain-structured Bayesian network.
//!
//! Every feature plus the group and target columns is modeled; predictions
//! are never synthesized.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::dataset::{Column, DataError, DataTable, FeatureKind, Group, Schema};
use crate::privacy::sample_laplace;
use crate::seed;

pub const SYNTH_FORMAT_VERSION: u32 = 1;
pub const MIN_FIT_ROWS: usize = 50;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synthesizers need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("column `{0}` has no observed values")]
    EmptyColumn(String),
    #[error("invalid synthesizer specification: {0}")]
    InvalidSpec(String),
    #[error("unsupported synthesizer file version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthesizerSpec {
    IndependentMarginals,
    GaussianCopula,
    ChainBayesDp { epsilon: f64, bins: usize },
}

impl SynthesizerSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        match *self {
            SynthesizerSpec::ChainBayesDp { epsilon, .. }
                if !(epsilon > 0.0 && epsilon.is_finite()) =>
            {
                Err(SynthError::InvalidSpec(format!(
                    "epsilon must be positive, got {epsilon}"
                )))
            }
            SynthesizerSpec::ChainBayesDp { bins: 0, .. } => {
                Err(SynthError::InvalidSpec("bins must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SynthesizerSpec::IndependentMarginals => "independent_marginals".into(),
            SynthesizerSpec::GaussianCopula => "gaussian_copula".into(),
            SynthesizerSpec::ChainBayesDp { epsilon, .. } => {
                format!("chain_bayes_dp(eps={epsilon})")
            }
        }
    }
}

/// Empirical distribution of one modeled column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Numeric {
        sorted: Vec<f64>,
    },
    /// `values` are category codes, or 0/1 for group and target.
    Discrete {
        values: Vec<u32>,
        probs: Vec<f64>,
    },
}

impl Marginal {
    /// Inverse CDF at `u` in [0, 1).
    fn quantile(&self, u: f64) -> Value {
        match self {
            Marginal::Numeric { sorted } => {
                let i = ((u * sorted.len() as f64) as usize).min(sorted.len() - 1);
                Value::Real(sorted[i])
            }
            Marginal::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return Value::Code(*v);
                    }
                }
                Value::Code(*values.last().expect("non-empty marginal"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Real(f64),
    Code(u32),
}

/// A released parent-child table of the chain model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEdge {
    pub parent: usize,
    pub child: usize,
    /// Joint probabilities, row-major `parent_bin x child_bin`, after
    /// clamping and renormalization.
    pub joint: Vec<f64>,
    pub epsilon_spent: f64,
}

/// Discretization of one column for the chain model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    /// Upper-exclusive edges for numeric columns; empty for discrete ones.
    pub edges: Vec<f64>,
    /// Observed values falling in each numeric bin.
    pub members: Vec<Vec<f64>>,
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub root: usize,
    pub root_marginal: Vec<f64>,
    pub edges: Vec<ChainEdge>,
    pub bins: Vec<Binning>,
    /// Budget of the root marginal when it is released on its own.
    pub root_epsilon: f64,
}

impl ChainModel {
    pub fn epsilon_spent(&self) -> f64 {
        if self.edges.is_empty() {
            return self.root_epsilon;
        }
        self.edges.iter().map(|e| e.epsilon_spent).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthModel {
    Independent,
    Copula {
        correlation: Vec<f64>,
        /// Columns of `V * sqrt(L)` for the repaired correlation.
        factor: Vec<f64>,
    },
    Chain(ChainModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSynthesizer {
    pub format_version: u32,
    pub spec: SynthesizerSpec,
    pub schema: Schema,
    /// Features in schema order, then group, then target.
    pub marginals: Vec<Marginal>,
    /// Level names of each categorical feature; empty for numeric ones.
    pub levels: Vec<Vec<String>>,
    pub model: SynthModel,
}

/// Modeled cells of `table` as floats; categorical codes, group and target as
/// small integers. `None` is MISSING.
fn modeled_columns(table: &DataTable) -> Vec<Vec<Option<f64>>> {
    let mut cols: Vec<Vec<Option<f64>>> = table
        .columns()
        .iter()
        .map(|c| match c {
            Column::Numeric(v) => v.clone(),
            Column::Categorical { codes, .. } => codes.iter().map(|c| c.map(f64::from)).collect(),
        })
        .collect();
    cols.push(
        table
            .groups()
            .iter()
            .map(|g| Some(f64::from(u8::from(*g == Group::Underprivileged))))
            .collect(),
    );
    cols.push(
        table
            .targets()
            .iter()
            .map(|&y| Some(f64::from(u8::from(y))))
            .collect(),
    );
    cols
}

fn fit_marginal(name: &str, cells: &[Option<f64>], numeric: bool) -> Result<Marginal, SynthError> {
    let mut observed: Vec<f64> = cells.iter().flatten().copied().collect();
    if observed.is_empty() {
        return Err(SynthError::EmptyColumn(name.to_string()));
    }
    observed.sort_by(f64::total_cmp);
    if numeric {
        return Ok(Marginal::Numeric { sorted: observed });
    }
    let mut values: Vec<u32> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for v in observed {
        let code = v as u32;
        if values.last() == Some(&code) {
            *counts.last_mut().unwrap() += 1;
        } else {
            values.push(code);
            counts.push(1);
        }
    }
    let total: usize = counts.iter().sum();
    Ok(Marginal::Discrete {
        values,
        probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
    })
}

/// Average ranks (1-based) of observed cells; `None` stays `None`.
fn average_ranks(cells: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut idx: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].is_some()).collect();
    idx.sort_by(|&a, &b| cells[a].unwrap().total_cmp(&cells[b].unwrap()));
    let mut ranks = vec![None; cells.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && cells[idx[end + 1]] == cells[idx[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &idx[start..=end] {
            ranks[i] = Some(avg);
        }
        start = end + 1;
    }
    ranks
}

/// Gaussian normal scores; MISSING cells score 0.
fn normal_scores(cells: &[Option<f64>], normal: &Normal) -> Vec<f64> {
    let n_obs = cells.iter().flatten().count() as f64;
    average_ranks(cells)
        .into_iter()
        .map(|r| r.map_or(0.0, |r| normal.inverse_cdf((r - 0.5) / n_obs)))
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Clips negative eigenvalues and rescales to unit diagonal. Returns the
/// repaired matrix and a factor `F` with `F F^T` equal to it.
fn repair_correlation(c: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = c.nrows();
    let eig = SymmetricEigen::new(c);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let psd = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale: Vec<f64> = (0..d)
        .map(|i| {
            let v = psd[(i, i)];
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut unit = DMatrix::from_fn(d, d, |i, j| psd[(i, j)] * scale[i] * scale[j]);
    for i in 0..d {
        unit[(i, i)] = 1.0;
    }
    let eig = SymmetricEigen::new(unit.clone());
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&root);
    (unit, factor)
}

fn discretize(marginal: &Marginal, cells: &[Option<f64>], bins: usize) -> (Binning, Vec<usize>) {
    match marginal {
        Marginal::Numeric { sorted } => {
            let n = sorted.len();
            let edges: Vec<f64> = (1..bins)
                .map(|b| crate::stats::quantile_sorted(sorted, b as f64 / bins as f64))
                .collect();
            let bin_of = |v: f64| edges.partition_point(|&e| e <= v);
            let fill = bin_of(sorted[n / 2]);
            let mut members = vec![Vec::new(); bins];
            for &v in sorted {
                members[bin_of(v)].push(v);
            }
            let codes = cells.iter().map(|c| c.map_or(fill, bin_of)).collect();
            (
                Binning {
                    edges,
                    members,
                    cardinality: bins,
                },
                codes,
            )
        }
        Marginal::Discrete { values, probs } => {
            let mode = probs
                .iter()
                .enumerate()
                .fold(0, |best, (i, p)| if *p > probs[best] { i } else { best });
            let codes = cells
                .iter()
                .map(|c| {
                    c.map_or(mode, |v| {
                        values.iter().position(|&x| x == v as u32).unwrap_or(mode)
                    })
                })
                .collect();
            (
                Binning {
                    edges: Vec::new(),
                    members: Vec::new(),
                    cardinality: values.len(),
                },
                codes,
            )
        }
    }
}

fn pair_counts(a: &[usize], ka: usize, b: &[usize], kb: usize) -> Vec<f64> {
    let mut t = vec![0.0; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        t[x * kb + y] += 1.0;
    }
    t
}

fn mutual_information(joint: &[f64], ka: usize, kb: usize) -> f64 {
    let total: f64 = joint.iter().sum();
    let pa: Vec<f64> = (0..ka)
        .map(|i| joint[i * kb..(i + 1) * kb].iter().sum::<f64>() / total)
        .collect();
    let pb: Vec<f64> = (0..kb)
        .map(|j| (0..ka).map(|i| joint[i * kb + j]).sum::<f64>() / total)
        .collect();
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let p = joint[i * kb + j] / total;
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi
}

fn clamp_normalize(mut t: Vec<f64>) -> Vec<f64> {
    for v in &mut t {
        *v = v.max(0.0);
    }
    let total: f64 = t.iter().sum();
    if total > 0.0 {
        t.iter_mut().for_each(|v| *v /= total);
    } else {
        let u = 1.0 / t.len() as f64;
        t.iter_mut().for_each(|v| *v = u);
    }
    t
}

fn fit_chain(
    marginals: &[Marginal],
    cols: &[Vec<Option<f64>>],
    epsilon: f64,
    bins: usize,
    seed_value: u64,
) -> ChainModel {
    let d = cols.len();
    let (binnings, codes): (Vec<Binning>, Vec<Vec<usize>>) = marginals
        .iter()
        .zip(cols)
        .map(|(m, c)| discretize(m, c, bins))
        .unzip();
    let mut rng = seed::rng(seed::derive(seed_value, "chain", 0));
    let root = rng.random_range(0..d);
    let n_edges = d - 1;
    let mut noise_rng = seed::rng(seed::derive(seed_value, "chain-noise", 0));

    if n_edges == 0 {
        let k = binnings[root].cardinality;
        let counts = pair_counts(&codes[root], k, &vec![0; codes[root].len()], 1);
        let noisy: Vec<f64> = counts
            .iter()
            .map(|c| c + sample_laplace(&mut noise_rng, 2.0 / epsilon))
            .collect();
        return ChainModel {
            root,
            root_marginal: clamp_normalize(noisy),
            edges: Vec::new(),
            bins: binnings,
            root_epsilon: epsilon,
        };
    }

    let scale = 2.0 * n_edges as f64 / epsilon;
    let per_table = epsilon / n_edges as f64;
    let mut placed = vec![root];
    let mut remaining: Vec<usize> = (0..d).filter(|&j| j != root).collect();
    let mut edges = Vec::with_capacity(n_edges);
    while !remaining.is_empty() {
        let mut best: Option<(f64, usize, usize)> = None;
        for &p in &placed {
            for (ri, &c) in remaining.iter().enumerate() {
                let t = pair_counts(
                    &codes[p],
                    binnings[p].cardinality,
                    &codes[c],
                    binnings[c].cardinality,
                );
                let mi = mutual_information(&t, binnings[p].cardinality, binnings[c].cardinality);
                if best.is_none_or(|(b, _, _)| mi > b) {
                    best = Some((mi, p, ri));
                }
            }
        }
        let (_, parent, ri) = best.expect("remaining columns");
        let child = remaining.remove(ri);
        let counts = pair_counts(
            &codes[parent],
            binnings[parent].cardinality,
            &codes[child],
            binnings[child].cardinality,
        );
        let noisy: Vec<f64> = counts
            .iter()
            .map(|c| c + sample_laplace(&mut noise_rng, scale))
            .collect();
        edges.push(ChainEdge {
            parent,
            child,
            joint: clamp_normalize(noisy),
            epsilon_spent: per_table,
        });
        placed.push(child);
    }
    let kr = binnings[root].cardinality;
    let kc = binnings[edges[0].child].cardinality;
    let root_marginal = (0..kr)
        .map(|i| edges[0].joint[i * kc..(i + 1) * kc].iter().sum())
        .collect();
    ChainModel {
        root,
        root_marginal,
        edges,
        bins: binnings,
        root_epsilon: 0.0,
    }
}

fn draw_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p / total;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl FittedSynthesizer {
    fn n_features(&self) -> usize {
        self.marginals.len() - 2
    }

    fn sample_row(&self, rng: &mut impl Rng) -> Vec<Value> {
        match &self.model {
            SynthModel::Independent => self
                .marginals
                .iter()
                .map(|m| m.quantile(rng.random()))
                .collect(),
            SynthModel::Copula { factor, .. } => {
                let d = self.marginals.len();
                let normal = Normal::standard();
                let e: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                (0..d)
                    .map(|i| {
                        let z: f64 = (0..d).map(|k| factor[i * d + k] * e[k]).sum();
                        let u = normal.cdf(z).min(1.0 - f64::EPSILON);
                        self.marginals[i].quantile(u)
                    })
                    .collect()
            }
            SynthModel::Chain(chain) => {
                let d = self.marginals.len();
                let mut bin = vec![0usize; d];
                bin[chain.root] = draw_index(&chain.root_marginal, rng.random());
                for e in &chain.edges {
                    let kc = chain.bins[e.child].cardinality;
                    let row = &e.joint[bin[e.parent] * kc..(bin[e.parent] + 1) * kc];
                    bin[e.child] = if row.iter().sum::<f64>() > 0.0 {
                        draw_index(row, rng.random())
                    } else {
                        rng.random_range(0..kc)
                    };
                }
                (0..d)
                    .map(|j| match &self.marginals[j] {
                        Marginal::Numeric { sorted } => {
                            let members = &chain.bins[j].members;
                            let b = bin[j];
                            // nearest non-empty bin when noise put mass on an empty one
                            let pick = (0..members.len())
                                .filter(|&k| !members[k].is_empty())
                                .min_by_key(|&k| k.abs_diff(b));
                            match pick {
                                Some(k) => {
                                    let m = &members[k];
                                    Value::Real(m[rng.random_range(0..m.len())])
                                }
                                None => Value::Real(sorted[sorted.len() / 2]),
                            }
                        }
                        Marginal::Discrete { values, .. } => Value::Code(values[bin[j]]),
                    })
                    .collect()
            }
        }
    }

    /// `n` synthetic rows, in the source schema without predictions.
    pub fn sample(&self, n: usize, seed_value: u64) -> Result<DataTable, SynthError> {
        let rows: Vec<Vec<Value>> = (0..n)
            .into_par_iter()
            .map(|i| self.sample_row(&mut seed::rng(seed::stream(seed_value, i as u64))))
            .collect();
        let d = self.n_features();
        let mut columns = Vec::with_capacity(d);
        for (j, spec) in self.schema.feature_columns.iter().enumerate() {
            columns.push(match spec.kind {
                FeatureKind::Numeric => Column::Numeric(
                    rows.iter()
                        .map(|r| match r[j] {
                            Value::Real(v) => Some(v),
                            Value::Code(c) => Some(f64::from(c)),
                        })
                        .collect(),
                ),
                FeatureKind::Categorical => Column::Categorical {
                    levels: self.levels[j].clone(),
                    codes: rows
                        .iter()
                        .map(|r| match r[j] {
                            Value::Code(c) => Some(c),
                            Value::Real(v) => Some(v as u32),
                        })
                        .collect(),
                },
            });
        }
        let code = |v: Value| match v {
            Value::Code(c) => c,
            Value::Real(x) => x as u32,
        };
        let groups = rows
            .iter()
            .map(|r| {
                if code(r[d]) == 1 {
                    Group::Underprivileged
                } else {
                    Group::Privileged
                }
            })
            .collect();
        let targets = rows.iter().map(|r| code(r[d + 1]) == 1).collect();
        Ok(DataTable::new(
            self.schema.clone(),
            columns,
            groups,
            targets,
            None,
        )?)
    }

    pub fn to_json(&self) -> Result<String, SynthError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let fitted: FittedSynthesizer = serde_json::from_str(text)?;
        if fitted.format_version != SYNTH_FORMAT_VERSION {
            return Err(SynthError::UnsupportedVersion(fitted.format_version));
        }
        Ok(fitted)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SynthError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Learns the synthesizer described by `spec` from `table`.
pub fn fit(
    spec: &SynthesizerSpec,
    table: &DataTable,
    seed_value: u64,
) -> Result<FittedSynthesizer, SynthError> {
    spec.validate()?;
    let n = table.n_rows();
    if n < MIN_FIT_ROWS {
        return Err(SynthError::TooFewRows {
            needed: MIN_FIT_ROWS,
            got: n,
        });
    }
    let cols = modeled_columns(table);
    let mut schema = table.schema().clone();
    schema.prediction_column = None;
    let mut names: Vec<String> = schema
        .feature_columns
        .iter()
        .map(|f| f.name.clone())
        .collect();
    names.push(schema.group_column.clone());
    names.push(schema.target_column.clone());
    let mut numeric: Vec<bool> = schema
        .feature_columns
        .iter()
        .map(|f| f.kind == FeatureKind::Numeric)
        .collect();
    numeric.extend([false, false]);
    let marginals = cols
        .iter()
        .zip(&names)
        .zip(&numeric)
        .map(|((c, name), &num)| fit_marginal(name, c, num))
        .collect::<Result<Vec<_>, _>>()?;
    let levels = table
        .columns()
        .iter()
        .map(|c| match c {
            Column::Categorical { levels, .. } => levels.clone(),
            Column::Numeric(_) => Vec::new(),
        })
        .collect();
    let model = match *spec {
        SynthesizerSpec::IndependentMarginals => SynthModel::Independent,
        SynthesizerSpec::GaussianCopula => {
            let normal = Normal::standard();
            let scores: Vec<Vec<f64>> = cols.iter().map(|c| normal_scores(c, &normal)).collect();
            let d = scores.len();
            let raw = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    1.0
                } else {
                    pearson(&scores[i], &scores[j])
                }
            });
            let (corr, factor) = repair_correlation(raw);
            SynthModel::Copula {
                correlation: corr.transpose().as_slice().to_vec(),
                factor: factor.transpose().as_slice().to_vec(),
            }
        }
        SynthesizerSpec::ChainBayesDp { epsilon, bins } => {
            SynthModel::Chain(fit_chain(&marginals, &cols, epsilon, bins, seed_value))
        }
    };
    Ok(FittedSynthesizer {
        format_version: SYNTH_FORMAT_VERSION,
        spec: *spec,
        schema,
        marginals,
        levels,
        model,
    })
}
