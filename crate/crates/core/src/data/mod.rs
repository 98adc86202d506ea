//! Tabular datasets: CSV ingestion under a declared schema, one-hot
//! encoding, standardization, seeded splits and a synthetic generator.
//!
//! Sensitive attributes travel with a [`Dataset`] as raw strings but never
//! enter its feature matrix.

mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nnet::{Batch, Task};
use crate::{Error, Result};

pub use synthetic::{synthesize, SyntheticSpec, GROUP_COLUMN};

/// Cell values treated as missing.
pub const MISSING_MARKERS: [&str; 3] = ["", "?", "NA"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_columns: Vec<FeatureColumn>,
    pub label_column: String,
    #[serde(default)]
    pub sensitive_columns: Vec<String>,
    pub task: Task,
    /// Label strings in class-index order. Without it labels are parsed as
    /// numbers.
    #[serde(default)]
    pub label_levels: Option<Vec<String>>,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Schema("no feature columns declared".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.feature_columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("feature column `{}` declared twice", c.name)));
            }
        }
        if seen.contains(self.label_column.as_str()) {
            return Err(Error::Schema(format!("label column `{}` is also a feature", self.label_column)));
        }
        for s in &self.sensitive_columns {
            if seen.contains(s.as_str()) {
                return Err(Error::Schema(format!(
                    "sensitive column `{s}` must not be a feature column"
                )));
            }
            if *s == self.label_column {
                return Err(Error::Schema(format!("sensitive column `{s}` is the label")));
            }
        }
        if let Some(levels) = &self.label_levels {
            if self.task == Task::RegressionMse {
                return Err(Error::Schema("label_levels given for a regression task".into()));
            }
            if self.task != Task::MulticlassCe && levels.len() != 2 {
                return Err(Error::Schema(format!(
                    "binary task needs exactly 2 label levels, got {}",
                    levels.len()
                )));
            }
        }
        Ok(())
    }
}

/// Position of one schema column inside the encoded feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub offset: usize,
    /// Sorted levels of a categorical column, one output column each.
    pub levels: Vec<String>,
}

impl EncodedColumn {
    pub fn width(&self) -> usize {
        match self.kind {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical => self.levels.len(),
        }
    }
}

/// Per encoded column `mean` and population `std`. One-hot columns keep
/// `(0, 1)` so standardization leaves them untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    fn fit(raw: &Array2<f64>, encoding: &[EncodedColumn]) -> NormStats {
        let d = raw.ncols();
        let mut mean = vec![0.0; d];
        let mut std = vec![1.0; d];
        for col in encoding.iter().filter(|c| c.kind == ColumnKind::Numeric) {
            let j = col.offset;
            let values = raw.column(j);
            let n = values.len() as f64;
            let m = values.sum() / n;
            let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            // constant columns are only centered
            std[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        NormStats { mean, std }
    }

    fn apply(&self, raw: &Array2<f64>) -> Array2<f64> {
        let mut out = raw.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

/// Encoded examples with evaluation-only sensitive attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    raw: Array2<f64>,
    features: Array2<f64>,
    targets: Vec<f64>,
    task: Task,
    sensitive_names: Vec<String>,
    /// `sensitive[a][i]`: value of attribute `a` for example `i`.
    sensitive: Vec<Vec<String>>,
    encoding: Vec<EncodedColumn>,
    norm_stats: NormStats,
    dropped_rows: usize,
    rejected_rows: usize,
}

impl Dataset {
    /// Builds a dataset from encoded, unstandardized features and fits the
    /// normalization on all rows.
    pub fn from_encoded(
        raw: Array2<f64>,
        targets: Vec<f64>,
        task: Task,
        encoding: Vec<EncodedColumn>,
        sensitive_names: Vec<String>,
        sensitive: Vec<Vec<String>>,
    ) -> Result<Dataset> {
        let n = raw.nrows();
        if targets.len() != n {
            return Err(Error::Data(format!("{n} feature rows but {} targets", targets.len())));
        }
        let width: usize = encoding.iter().map(EncodedColumn::width).sum();
        if width != raw.ncols() {
            return Err(Error::Data(format!(
                "encoding describes {width} columns, matrix has {}",
                raw.ncols()
            )));
        }
        if sensitive.len() != sensitive_names.len() || sensitive.iter().any(|s| s.len() != n) {
            return Err(Error::Data("one value per example expected for every sensitive column".into()));
        }
        let norm_stats = NormStats::fit(&raw, &encoding);
        let features = norm_stats.apply(&raw);
        Ok(Dataset {
            raw,
            features,
            targets,
            task,
            sensitive_names,
            sensitive,
            encoding,
            norm_stats,
            dropped_rows: 0,
            rejected_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Standardized feature matrix.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Encoded features before standardization.
    pub fn raw_features(&self) -> &Array2<f64> {
        &self.raw
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn encoding(&self) -> &[EncodedColumn] {
        &self.encoding
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.norm_stats
    }

    pub fn sensitive_names(&self) -> &[String] {
        &self.sensitive_names
    }

    pub fn sensitive_values(&self, name: &str) -> Option<&[String]> {
        let a = self.sensitive_names.iter().position(|s| s == name)?;
        Some(&self.sensitive[a])
    }

    /// Rows dropped for missing values.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Rows rejected for unparsable values.
    pub fn rejected_rows(&self) -> usize {
        self.rejected_rows
    }

    /// Batch of the given example indices.
    pub fn batch(&self, rows: &[usize]) -> Result<Batch> {
        let features = self.features.select(Axis(0), rows);
        let targets = rows.iter().map(|&r| self.targets[r]).collect();
        Batch::new(features, targets, rows.to_vec())
    }

    /// All examples as one batch.
    pub fn full_batch(&self) -> Result<Batch> {
        Batch::new(self.features.clone(), self.targets.clone(), (0..self.len()).collect())
    }

    /// Original level of a categorical column for one example.
    pub fn decode_categorical(&self, column: &str, row: usize) -> Result<String> {
        let col = self
            .encoding
            .iter()
            .find(|c| c.name == column && c.kind == ColumnKind::Categorical)
            .ok_or_else(|| Error::Schema(format!("no categorical column `{column}`")))?;
        let cells = self.raw.row(row);
        (0..col.levels.len())
            .find(|&k| cells[col.offset + k] == 1.0)
            .map(|k| col.levels[k].clone())
            .ok_or_else(|| Error::Data(format!("row {row} has no level set for `{column}`")))
    }

    /// Subset of rows, normalized with `stats`.
    fn subset(&self, rows: &[usize], stats: &NormStats) -> Dataset {
        let raw = self.raw.select(Axis(0), rows);
        Dataset {
            features: stats.apply(&raw),
            raw,
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            task: self.task,
            sensitive_names: self.sensitive_names.clone(),
            sensitive: self
                .sensitive
                .iter()
                .map(|col| rows.iter().map(|&r| col[r].clone()).collect())
                .collect(),
            encoding: self.encoding.clone(),
            norm_stats: stats.clone(),
            dropped_rows: self.dropped_rows,
            rejected_rows: self.rejected_rows,
        }
    }
}

/// Seeded shuffle into train and test sets; normalization is refit on the
/// training rows and applied to both sides.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let n = dataset.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Config(format!(
            "splitting {n} examples with test_fraction {test_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test_rows, train_rows) = order.split_at(n_test);
    let train_raw = dataset.raw.select(Axis(0), train_rows);
    let stats = NormStats::fit(&train_raw, &dataset.encoding);
    Ok((dataset.subset(train_rows, &stats), dataset.subset(test_rows, &stats)))
}

fn is_missing(cell: &str) -> bool {
    MISSING_MARKERS.contains(&cell.trim())
}

fn parse_label(cell: &str, schema: &DatasetSchema) -> std::result::Result<f64, String> {
    let cell = cell.trim();
    if let Some(levels) = &schema.label_levels {
        return levels
            .iter()
            .position(|l| l == cell)
            .map(|i| i as f64)
            .ok_or_else(|| format!("unknown label `{cell}`"));
    }
    let y: f64 = cell.parse().map_err(|_| format!("non-numeric label `{cell}`"))?;
    if !y.is_finite() {
        return Err(format!("non-finite label `{cell}`"));
    }
    match schema.task {
        Task::RegressionMse => Ok(y),
        Task::BinaryBce | Task::LogisticRegressionMse if y == 0.0 || y == 1.0 => Ok(y),
        Task::MulticlassCe if y >= 0.0 && y.fract() == 0.0 => Ok(y),
        _ => Err(format!("label `{cell}` invalid for task {:?}", schema.task)),
    }
}

/// Reads a headed CSV file. Rows with a missing value in any schema column
/// are dropped; rows with unparsable numbers or labels are rejected and
/// logged. Columns not named by the schema are ignored.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from_reader(file, schema)
}

pub fn load_csv_from_reader<R: std::io::Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_owned(), i))
        .collect();
    let locate = |name: &str| {
        header
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in CSV header")))
    };
    let feature_idx: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|c| locate(&c.name))
        .collect::<Result<_>>()?;
    let label_idx = locate(&schema.label_column)?;
    let sensitive_idx: Vec<usize> = schema
        .sensitive_columns
        .iter()
        .map(|s| locate(s))
        .collect::<Result<_>>()?;

    let mut rows: Vec<(Vec<String>, f64, Vec<String>)> = Vec::new();
    let (mut dropped, mut rejected) = (0usize, 0usize);
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let used = feature_idx.iter().chain(&sensitive_idx).chain([&label_idx]);
        if used.clone().any(|&i| is_missing(cell(i))) {
            dropped += 1;
            continue;
        }
        let bad_number = schema
            .feature_columns
            .iter()
            .zip(&feature_idx)
            .filter(|(c, _)| c.kind == ColumnKind::Numeric)
            .find(|(_, &i)| !cell(i).trim().parse::<f64>().is_ok_and(f64::is_finite));
        if let Some((c, &i)) = bad_number {
            log::warn!("row {}: non-numeric value `{}` in `{}`, row rejected", line + 2, cell(i), c.name);
            rejected += 1;
            continue;
        }
        let label = match parse_label(cell(label_idx), schema) {
            Ok(y) => y,
            Err(msg) => {
                log::warn!("row {}: {msg}, row rejected", line + 2);
                rejected += 1;
                continue;
            }
        };
        rows.push((
            feature_idx.iter().map(|&i| cell(i).trim().to_owned()).collect(),
            label,
            sensitive_idx.iter().map(|&i| cell(i).trim().to_owned()).collect(),
        ));
    }
    if dropped > 0 || rejected > 0 {
        log::info!("{dropped} rows dropped for missing values, {rejected} rows rejected");
    }
    if rows.is_empty() {
        return Err(Error::Data("no usable rows in CSV".into()));
    }

    let mut encoding = Vec::with_capacity(schema.feature_columns.len());
    let mut offset = 0;
    for (j, c) in schema.feature_columns.iter().enumerate() {
        let levels = match c.kind {
            ColumnKind::Numeric => Vec::new(),
            ColumnKind::Categorical => rows
                .iter()
                .map(|r| r.0[j].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let col = EncodedColumn {
            name: c.name.clone(),
            kind: c.kind,
            offset,
            levels,
        };
        offset += col.width();
        encoding.push(col);
    }

    let mut raw = Array2::zeros((rows.len(), offset));
    for (i, (cells, _, _)) in rows.iter().enumerate() {
        for (col, value) in encoding.iter().zip(cells) {
            match col.kind {
                ColumnKind::Numeric => raw[[i, col.offset]] = value.parse().expect("validated above"),
                ColumnKind::Categorical => {
                    let k = col.levels.binary_search(value).expect("level collected above");
                    raw[[i, col.offset + k]] = 1.0;
                }
            }
        }
    }
    let targets = rows.iter().map(|r| r.1).collect();
    let sensitive = (0..sensitive_idx.len())
        .map(|a| rows.iter().map(|r| r.2[a].clone()).collect())
        .collect();
    let mut ds = Dataset::from_encoded(
        raw,
        targets,
        schema.task,
        encoding,
        schema.sensitive_columns.clone(),
        sensitive,
    )?;
    ds.dropped_rows = dropped;
    ds.rejected_rows = rejected;
    Ok(ds)
}
