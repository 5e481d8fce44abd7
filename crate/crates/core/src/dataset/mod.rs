//! Tabular time-series data: schema, ingestion, lag construction, chronological
//! splitting, histogram binning and a synthetic emergency-department generator.

mod binning;
mod csv_io;
mod lag;
pub use lag::lag_feature_name;
mod split;
pub mod synth;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use binning::{bin_features, BinMapper, BinnedDataset};
pub use csv_io::{date_to_ordinal, load_csv, load_csv_with_codes, ordinal_to_date, write_csv};
pub use lag::{build_lagged, LagSpec};
pub use split::temporal_split;
pub use synth::{synth_generate, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Feature,
    Target,
    TimeIndex,
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(default = "default_kind")]
    pub kind: ColumnKind,
    #[serde(default = "default_role")]
    pub role: ColumnRole,
}

fn default_kind() -> ColumnKind {
    ColumnKind::Numeric
}

fn default_role() -> ColumnRole {
    ColumnRole::Feature
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }

    pub fn feature(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self::new(name, kind, ColumnRole::Feature)
    }
}

/// Checks the schema-level invariants: unique names, one target, at most one
/// time index.
pub fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let mut seen = HashSet::new();
    for c in schema {
        if !seen.insert(c.name.as_str()) {
            return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
        }
    }
    let targets = schema.iter().filter(|c| c.role == ColumnRole::Target).count();
    if targets != 1 {
        return Err(Error::Schema(format!(
            "expected exactly one target column, found {targets}"
        )));
    }
    let times = schema
        .iter()
        .filter(|c| c.role == ColumnRole::TimeIndex)
        .count();
    if times > 1 {
        return Err(Error::Schema(format!(
            "at most one time-index column allowed, found {times}"
        )));
    }
    Ok(())
}

/// Category labels per categorical column, in first-appearance order; the
/// position of a label is its integer code.
pub type CodeMaps = BTreeMap<String, Vec<String>>;

/// Feature matrix plus target series and a strictly increasing time index
/// (day ordinals).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<ColumnSchema>,
    x: Matrix,
    y: Vec<f64>,
    time_index: Vec<i64>,
    target_name: String,
    time_name: Option<String>,
    code_maps: CodeMaps,
}

impl Dataset {
    /// Assembles a dataset, enforcing the finite-value and time-ordering
    /// invariants.
    pub fn new(
        features: Vec<ColumnSchema>,
        x: Matrix,
        y: Vec<f64>,
        time_index: Option<Vec<i64>>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let n = y.len();
        if x.n_rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.n_rows(),
            });
        }
        x.check_cols(features.len())?;
        for (i, row) in x.rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue {
                    row: i + 1,
                    column: features[j].name.clone(),
                });
            }
        }
        let target_name = target_name.into();
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingValue {
                row: i + 1,
                column: target_name,
            });
        }
        let time_index = match time_index {
            Some(t) => {
                if t.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: t.len(),
                    });
                }
                if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(Error::NonMonotoneTime { row: i + 2 });
                }
                t
            }
            None => (0..n as i64).collect(),
        };
        let mut names = HashSet::new();
        for f in &features {
            if !names.insert(f.name.as_str()) || f.name == target_name {
                return Err(Error::Schema(format!("duplicate column `{}`", f.name)));
            }
        }
        Ok(Self {
            features,
            x,
            y,
            time_index,
            target_name,
            time_name: None,
            code_maps: CodeMaps::new(),
        })
    }

    pub fn with_time_name(mut self, name: Option<String>) -> Self {
        self.time_name = name;
        self
    }

    pub fn with_code_maps(mut self, maps: CodeMaps) -> Self {
        self.code_maps = maps;
        self
    }

    /// All-numeric dataset with features named `x0, x1, ...` and target `y`.
    pub fn numeric(x: Matrix, y: Vec<f64>) -> Result<Self> {
        let features = (0..x.n_cols())
            .map(|j| ColumnSchema::feature(format!("x{j}"), ColumnKind::Numeric))
            .collect();
        Dataset::new(features, x, y, None, "y")
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[ColumnSchema] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn time_index(&self) -> &[i64] {
        &self.time_index
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn time_name(&self) -> Option<&str> {
        self.time_name.as_deref()
    }

    pub fn code_maps(&self) -> &CodeMaps {
        &self.code_maps
    }

    /// Full column schema: features, then target, then time index.
    pub fn schema(&self) -> Vec<ColumnSchema> {
        let mut s = self.features.clone();
        s.push(ColumnSchema::new(
            self.target_name.clone(),
            ColumnKind::Numeric,
            ColumnRole::Target,
        ));
        if let Some(t) = &self.time_name {
            s.push(ColumnSchema::new(
                t.clone(),
                ColumnKind::Numeric,
                ColumnRole::TimeIndex,
            ));
        }
        s
    }

    pub fn categorical_features(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == ColumnKind::Categorical)
            .map(|(j, _)| j)
            .collect()
    }

    /// Rows `[start, end)`, keeping schema and code maps.
    pub fn slice_rows(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            features: self.features.clone(),
            x: self.x.slice_rows(start, end),
            y: self.y[start..end].to_vec(),
            time_index: self.time_index[start..end].to_vec(),
            target_name: self.target_name.clone(),
            time_name: self.time_name.clone(),
            code_maps: self.code_maps.clone(),
        }
    }

    /// Arbitrary row subset; `idx` must be increasing to preserve time order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        Dataset {
            features: self.features.clone(),
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            time_index: idx.iter().map(|&i| self.time_index[i]).collect(),
            target_name: self.target_name.clone(),
            time_name: self.time_name.clone(),
            code_maps: self.code_maps.clone(),
        }
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_features(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&j) = cols.iter().find(|&&j| j >= self.n_features()) {
            return Err(Error::invalid(
                "features",
                format!("index {j} out of range for {} features", self.n_features()),
            ));
        }
        let features: Vec<ColumnSchema> = cols.iter().map(|&j| self.features[j].clone()).collect();
        let code_maps = self
            .code_maps
            .iter()
            .filter(|(k, _)| features.iter().any(|f| &f.name == *k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(Dataset {
            features,
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            time_index: self.time_index.clone(),
            target_name: self.target_name.clone(),
            time_name: self.time_name.clone(),
            code_maps,
        })
    }

    /// Copy with the target replaced; used by leakage tests and resampling.
    pub fn with_targets(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: y.len(),
            });
        }
        let mut d = self.clone();
        d.y = y;
        Ok(d)
    }

    pub(crate) fn append_features(
        &self,
        cols: Vec<ColumnSchema>,
        values: &[Vec<f64>],
    ) -> Result<Dataset> {
        let x = self.x.hstack(values)?;
        let mut features = self.features.clone();
        features.extend(cols);
        let mut d = Dataset::new(
            features,
            x,
            self.y.clone(),
            Some(self.time_index.clone()),
            self.target_name.clone(),
        )?;
        d.time_name = self.time_name.clone();
        d.code_maps = self.code_maps.clone();
        Ok(d)
    }

    /// Stable content hash of the column schema, for tagging saved models.
    pub fn schema_fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(&self.schema()).expect("schema serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
