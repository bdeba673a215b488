//! Tabular data model, CSV ingestion, seeded splitting and the benchmark
//! generator.
//!
//! Tables are stored column-wise. Feature cells are `Option`s where `None` is
//! the MISSING marker; group and target are never missing, and predictions are
//! either present for every row or absent for all of them.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column `{0}` is missing from the CSV header")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` has invalid label `{value}`")]
    BadLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("cannot split a table of {0} rows into two non-empty parts")]
    DegenerateSplit(usize),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
        }
    }
}

fn default_group_column() -> String {
    "group".into()
}
fn default_target_column() -> String {
    "y".into()
}

/// Column roles of an audit dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub feature_columns: Vec<FeatureSpec>,
    #[serde(default = "default_group_column")]
    pub group_column: String,
    pub privileged_value: String,
    pub underprivileged_value: String,
    #[serde(default = "default_target_column")]
    pub target_column: String,
    #[serde(default)]
    pub prediction_column: Option<String>,
    /// Cell text read and written as MISSING.
    #[serde(default)]
    pub missing_token: String,
}

impl Schema {
    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = BTreeSet::new();
        for f in &self.feature_columns {
            if f.name.is_empty() {
                return Err(DataError::InvalidSchema("empty feature name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(DataError::InvalidSchema(format!(
                    "duplicate feature column `{}`",
                    f.name
                )));
            }
        }
        let mut roles = vec![
            ("group", &self.group_column),
            ("target", &self.target_column),
        ];
        if let Some(p) = &self.prediction_column {
            roles.push(("prediction", p));
        }
        for (i, (role, name)) in roles.iter().enumerate() {
            if seen.contains(name.as_str()) {
                return Err(DataError::InvalidSchema(format!(
                    "{role} column `{name}` is also a feature column"
                )));
            }
            if roles[..i].iter().any(|(_, other)| other == name) {
                return Err(DataError::InvalidSchema(format!(
                    "{role} column `{name}` reuses another role's column"
                )));
            }
        }
        if self.privileged_value == self.underprivileged_value {
            return Err(DataError::InvalidSchema(
                "privileged and underprivileged values must differ".into(),
            ));
        }
        Ok(())
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.feature_columns.iter().find(|f| f.name == name)
    }

    fn prediction_header(&self) -> &str {
        self.prediction_column.as_deref().unwrap_or("prediction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Privileged,
    Underprivileged,
}

impl Group {
    pub fn swapped(self) -> Self {
        match self {
            Group::Privileged => Group::Underprivileged,
            Group::Underprivileged => Group::Privileged,
        }
    }
}

/// One feature column. `None` cells are MISSING.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical {
        levels: Vec<String>,
        codes: Vec<Option<u32>>,
    },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            Column::Numeric(_) => FeatureKind::Numeric,
            Column::Categorical { .. } => FeatureKind::Categorical,
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn set_missing(&mut self, row: usize) {
        match self {
            Column::Numeric(v) => v[row] = None,
            Column::Categorical { codes, .. } => codes[row] = None,
        }
    }

    /// The cell rendered as text, `None` for MISSING.
    pub fn cell_text(&self, row: usize) -> Option<String> {
        match self {
            Column::Numeric(v) => v[row].map(|x| x.to_string()),
            Column::Categorical { levels, codes } => codes[row].map(|c| levels[c as usize].clone()),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical { levels, codes } => Column::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    schema: Schema,
    columns: Vec<Column>,
    group: Vec<Group>,
    target: Vec<bool>,
    prediction: Option<Vec<bool>>,
}

impl DataTable {
    pub fn new(
        schema: Schema,
        columns: Vec<Column>,
        group: Vec<Group>,
        target: Vec<bool>,
        prediction: Option<Vec<bool>>,
    ) -> Result<Self, DataError> {
        schema.validate()?;
        let n = target.len();
        if group.len() != n {
            return Err(DataError::InvalidTable(format!(
                "{} group labels for {n} rows",
                group.len()
            )));
        }
        if let Some(p) = &prediction {
            if p.len() != n {
                return Err(DataError::InvalidTable(format!(
                    "{} predictions for {n} rows",
                    p.len()
                )));
            }
        }
        if columns.len() != schema.feature_columns.len() {
            return Err(DataError::InvalidTable(format!(
                "{} columns for {} schema features",
                columns.len(),
                schema.feature_columns.len()
            )));
        }
        for (col, spec) in columns.iter().zip(&schema.feature_columns) {
            if col.len() != n {
                return Err(DataError::InvalidTable(format!(
                    "column `{}` has {} cells for {n} rows",
                    spec.name,
                    col.len()
                )));
            }
            if col.kind() != spec.kind {
                return Err(DataError::InvalidTable(format!(
                    "column `{}` does not match its declared kind",
                    spec.name
                )));
            }
            if let Column::Categorical { levels, codes } = col {
                if codes.iter().flatten().any(|&c| c as usize >= levels.len()) {
                    return Err(DataError::InvalidTable(format!(
                        "column `{}` has a code outside its level set",
                        spec.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            columns,
            group,
            target,
            prediction,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.schema.feature_columns.iter().map(|f| f.name.as_str())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema
            .feature_columns
            .iter()
            .position(|f| f.name == name)
    }

    pub(crate) fn column_mut(&mut self, index: usize) -> &mut Column {
        &mut self.columns[index]
    }

    pub fn groups(&self) -> &[Group] {
        &self.group
    }

    pub fn targets(&self) -> &[bool] {
        &self.target
    }

    pub fn predictions(&self) -> Option<&[bool]> {
        self.prediction.as_deref()
    }

    pub fn count_group(&self, group: Group) -> usize {
        self.group.iter().filter(|&&g| g == group).count()
    }

    /// Rows at `rows`, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            group: rows.iter().map(|&r| self.group[r]).collect(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            prediction: self
                .prediction
                .as_ref()
                .map(|p| rows.iter().map(|&r| p[r]).collect()),
        }
    }

    pub fn with_predictions(mut self, prediction: Vec<bool>) -> Result<DataTable, DataError> {
        if prediction.len() != self.n_rows() {
            return Err(DataError::InvalidTable(format!(
                "{} predictions for {} rows",
                prediction.len(),
                self.n_rows()
            )));
        }
        self.prediction = Some(prediction);
        Ok(self)
    }

    pub fn without_predictions(mut self) -> DataTable {
        self.prediction = None;
        self
    }

    pub fn with_groups(mut self, group: Vec<Group>) -> Result<DataTable, DataError> {
        if group.len() != self.n_rows() {
            return Err(DataError::InvalidTable(format!(
                "{} group labels for {} rows",
                group.len(),
                self.n_rows()
            )));
        }
        self.group = group;
        Ok(self)
    }

    /// Drops the named feature columns; unknown names are ignored.
    pub fn without_features(mut self, names: &[&str]) -> DataTable {
        let keep: Vec<bool> = self
            .schema
            .feature_columns
            .iter()
            .map(|f| !names.contains(&f.name.as_str()))
            .collect();
        let mut keep_iter = keep.iter();
        self.schema
            .feature_columns
            .retain(|_| *keep_iter.next().unwrap());
        let mut keep_iter = keep.iter();
        self.columns.retain(|_| *keep_iter.next().unwrap());
        self
    }

    /// Swaps the privileged/underprivileged designation of every row.
    pub fn with_swapped_groups(mut self) -> DataTable {
        for g in &mut self.group {
            *g = g.swapped();
        }
        std::mem::swap(
            &mut self.schema.privileged_value,
            &mut self.schema.underprivileged_value,
        );
        self
    }

    fn group_text(&self, g: Group) -> &str {
        match g {
            Group::Privileged => &self.schema.privileged_value,
            Group::Underprivileged => &self.schema.underprivileged_value,
        }
    }
}

fn parse_label(text: &str) -> Option<bool> {
    match text.trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<DataTable, DataError> {
    read_csv(File::open(path)?, schema)
}

/// Reads a header-first CSV. Rows keep file order.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<DataTable, DataError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<Vec<_>, _>>()?;
    let group_idx = find(&schema.group_column)?;
    let target_idx = find(&schema.target_column)?;
    let prediction_idx = schema.prediction_column.as_deref().map(find).transpose()?;

    let mut columns: Vec<Column> = schema
        .feature_columns
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Numeric => Column::Numeric(Vec::new()),
            FeatureKind::Categorical => Column::Categorical {
                levels: Vec::new(),
                codes: Vec::new(),
            },
        })
        .collect();
    let mut level_maps: Vec<HashMap<String, u32>> = vec![HashMap::new(); columns.len()];
    let mut group = Vec::new();
    let mut target = Vec::new();
    let mut prediction = prediction_idx.map(|_| Vec::new());

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        for ((col, &i), map) in columns.iter_mut().zip(&feature_idx).zip(&mut level_maps) {
            let text = cell(i);
            let missing = text == schema.missing_token;
            match col {
                Column::Numeric(v) => {
                    let value = if missing {
                        None
                    } else {
                        text.trim().parse::<f64>().ok().filter(|x| x.is_finite())
                    };
                    v.push(value);
                }
                Column::Categorical { levels, codes } => {
                    if missing {
                        codes.push(None);
                    } else {
                        let next = levels.len() as u32;
                        let code = *map.entry(text.to_string()).or_insert_with(|| {
                            levels.push(text.to_string());
                            next
                        });
                        codes.push(Some(code));
                    }
                }
            }
        }
        let g = cell(group_idx);
        group.push(if g == schema.privileged_value {
            Group::Privileged
        } else if g == schema.underprivileged_value {
            Group::Underprivileged
        } else {
            return Err(DataError::BadLabel {
                row,
                column: schema.group_column.clone(),
                value: g.to_string(),
            });
        });
        let y = cell(target_idx);
        target.push(parse_label(y).ok_or_else(|| DataError::BadLabel {
            row,
            column: schema.target_column.clone(),
            value: y.to_string(),
        })?);
        if let (Some(p), Some(i)) = (prediction.as_mut(), prediction_idx) {
            let text = cell(i);
            p.push(parse_label(text).ok_or_else(|| DataError::BadLabel {
                row,
                column: schema.prediction_header().to_string(),
                value: text.to_string(),
            })?);
        }
    }
    if target.is_empty() {
        return Err(DataError::EmptyFile);
    }
    DataTable::new(schema.clone(), columns, group, target, prediction)
}

pub fn save_csv(table: &DataTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    let file = File::create(path)?;
    write_csv(table, std::io::BufWriter::new(file))
}

/// Writes features, group, target, then predictions when present.
pub fn write_csv<W: Write>(table: &DataTable, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let schema = table.schema();
    let mut header: Vec<&str> = table.feature_names().collect();
    header.push(&schema.group_column);
    header.push(&schema.target_column);
    if table.predictions().is_some() {
        header.push(schema.prediction_header());
    }
    wtr.write_record(&header)?;
    for row in 0..table.n_rows() {
        let mut record: Vec<String> = table
            .columns()
            .iter()
            .map(|c| {
                c.cell_text(row)
                    .unwrap_or_else(|| schema.missing_token.clone())
            })
            .collect();
        record.push(table.group_text(table.groups()[row]).to_string());
        record.push(u8::from(table.targets()[row]).to_string());
        if let Some(p) = table.predictions() {
            record.push(u8::from(p[row]).to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self, DataError> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(DataError::InvalidSpec(format!(
                "split fraction {fraction} is not in (0, 1)"
            )));
        }
        Ok(Self { fraction, seed })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Size of the first part for `n` rows: `round(fraction * n)` clamped so
    /// both parts keep at least one row.
    pub fn first_size(&self, n: usize) -> Result<usize, DataError> {
        if n < 2 {
            return Err(DataError::DegenerateSplit(n));
        }
        let k = (self.fraction * n as f64).round() as usize;
        Ok(k.clamp(1, n - 1))
    }
}

/// Sorted indices of `k` rows drawn without replacement from `0..n`.
pub(crate) fn sample_sorted(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut picked = sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Partitions `table` into (first, rest); both keep source order.
pub fn split(table: &DataTable, spec: SplitSpec) -> Result<(DataTable, DataTable), DataError> {
    let n = table.n_rows();
    let k = spec.first_size(n)?;
    let mut rng = seed::rng(spec.seed);
    let first = sample_sorted(&mut rng, n, k);
    let mut in_first = vec![false; n];
    for &i in &first {
        in_first[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !in_first[i]).collect();
    Ok((table.select_rows(&first), table.select_rows(&rest)))
}

fn default_weight_decay() -> f64 {
    0.7
}

/// Parameters of the synthetic benchmark population.
///
/// Feature `j` (numeric columns first, then categorical) carries coefficient
/// `weight_decay^j`; numeric features are standard normal, shifted by
/// `group_shift` for underprivileged rows, and categorical features take three
/// equiprobable levels with effects -1, 0 and +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub n_rows: usize,
    pub n_numeric_features: usize,
    #[serde(default)]
    pub n_categorical_features: usize,
    pub group_balance: f64,
    pub base_rate_privileged: f64,
    pub base_rate_underprivileged: f64,
    pub signal_strength: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default)]
    pub group_shift: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(DataError::InvalidSpec(format!(
                    "{name} = {v} is not in (0, 1)"
                )))
            }
        };
        if self.n_rows == 0 {
            return Err(DataError::InvalidSpec("n_rows must be positive".into()));
        }
        open_unit("group_balance", self.group_balance)?;
        open_unit("base_rate_privileged", self.base_rate_privileged)?;
        open_unit("base_rate_underprivileged", self.base_rate_underprivileged)?;
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return Err(DataError::InvalidSpec(
                "signal_strength must be >= 0".into(),
            ));
        }
        if !(self.weight_decay > 0.0 && self.weight_decay.is_finite()) {
            return Err(DataError::InvalidSpec("weight_decay must be > 0".into()));
        }
        if !self.group_shift.is_finite() {
            return Err(DataError::InvalidSpec("group_shift must be finite".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let mut features: Vec<FeatureSpec> = (0..self.n_numeric_features)
            .map(|j| FeatureSpec::numeric(format!("num_{j}")))
            .collect();
        features.extend(
            (0..self.n_categorical_features).map(|j| FeatureSpec::categorical(format!("cat_{j}"))),
        );
        Schema {
            feature_columns: features,
            group_column: "group".into(),
            privileged_value: "privileged".into(),
            underprivileged_value: "underprivileged".into(),
            target_column: "y".into(),
            prediction_column: None,
            missing_token: String::new(),
        }
    }

    /// Coefficient of each feature in schema order.
    pub fn weights(&self) -> Vec<f64> {
        let d = self.n_numeric_features + self.n_categorical_features;
        (0..d).map(|j| self.weight_decay.powi(j as i32)).collect()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Offset `b` with `mean(sigmoid(score + b)) == rate`, by bisection.
fn solve_offset(scores: &[f64], rate: f64) -> f64 {
    if scores.is_empty() {
        return (rate / (1.0 - rate)).ln();
    }
    let mean_rate =
        |b: f64| scores.iter().map(|s| sigmoid(s + b)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rate(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<DataTable, DataError> {
    spec.validate()?;
    let n = spec.n_rows;
    let mut rng = seed::rng(seed::derive(spec.seed, "benchmark", 0));
    let group: Vec<Group> = (0..n)
        .map(|_| {
            if rng.random_bool(spec.group_balance) {
                Group::Underprivileged
            } else {
                Group::Privileged
            }
        })
        .collect();
    let weights = spec.weights();
    let mut scores = vec![0.0; n];
    let mut columns = Vec::with_capacity(weights.len());
    for w in weights.iter().take(spec.n_numeric_features) {
        let values: Vec<Option<f64>> = group
            .iter()
            .map(|g| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let shift = if *g == Group::Underprivileged {
                    spec.group_shift
                } else {
                    0.0
                };
                Some(z + shift)
            })
            .collect();
        for (s, v) in scores.iter_mut().zip(&values) {
            *s += spec.signal_strength * w * v.unwrap();
        }
        columns.push(Column::Numeric(values));
    }
    let levels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    for w in weights.iter().skip(spec.n_numeric_features) {
        let codes: Vec<Option<u32>> = (0..n).map(|_| Some(rng.random_range(0..3u32))).collect();
        for (s, c) in scores.iter_mut().zip(&codes) {
            *s += spec.signal_strength * w * (c.unwrap() as f64 - 1.0);
        }
        columns.push(Column::Categorical {
            levels: levels.clone(),
            codes,
        });
    }
    let mut offsets = [0.0; 2];
    for (slot, g, rate) in [
        (0, Group::Privileged, spec.base_rate_privileged),
        (1, Group::Underprivileged, spec.base_rate_underprivileged),
    ] {
        let s: Vec<f64> = scores
            .iter()
            .zip(&group)
            .filter(|(_, gg)| **gg == g)
            .map(|(s, _)| *s)
            .collect();
        offsets[slot] = solve_offset(&s, rate);
    }
    let target: Vec<bool> = scores
        .iter()
        .zip(&group)
        .map(|(s, g)| {
            let b = match g {
                Group::Privileged => offsets[0],
                Group::Underprivileged => offsets[1],
            };
            rng.random::<f64>() < sigmoid(s + b)
        })
        .collect();
    DataTable::new(spec.schema(), columns, group, target, None)
}
