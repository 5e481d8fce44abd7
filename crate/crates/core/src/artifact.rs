//! Versioned on-disk form of a fitted model.
//!
//! Reals are written in shortest round-trip decimal form and parsed back
//! exactly, so a loaded model predicts bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{CodeMaps, ColumnSchema, Dataset, LagSpec};
use crate::error::{Error, Result};
use crate::learner::{Model, Regressor};
use crate::matrix::Matrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub kind: String,
    /// Columns expected in input files, before lag expansion.
    pub input_schema: Vec<ColumnSchema>,
    pub lags: LagSpec,
    pub code_maps: CodeMaps,
    /// Model inputs, after lag expansion.
    pub feature_names: Vec<String>,
    pub schema_fingerprint: String,
    pub seed: u64,
    pub config_hash: String,
    pub model: Model,
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ModelArtifact {
    /// Wraps `model`, fitted on `train` (already lag-expanded from data with
    /// `input_schema`).
    pub fn new(
        model: Model,
        train: &Dataset,
        input_schema: Vec<ColumnSchema>,
        lags: LagSpec,
        seed: u64,
        config_hash: String,
    ) -> Result<Self> {
        if model.n_features() != train.n_features() {
            return Err(Error::DimensionMismatch {
                expected: train.n_features(),
                got: model.n_features(),
            });
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            kind: model.kind().to_string(),
            input_schema,
            lags,
            code_maps: train.code_maps().clone(),
            feature_names: train.feature_names(),
            schema_fingerprint: train.schema_fingerprint(),
            seed,
            config_hash,
            model,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        match v.get("format_version").and_then(|x| x.as_u64()) {
            Some(n) if n == FORMAT_VERSION as u64 => {}
            Some(n) => {
                return Err(Error::Format(format!(
                    "model format version {n} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Format("model file has no format_version".into())),
        }
        let a: ModelArtifact = serde_json::from_value(v)?;
        if a.kind != a.model.kind() {
            return Err(Error::Format(format!("kind tag {} does not match model {}", a.kind, a.model.kind())));
        }
        if a.feature_names.len() != a.model.n_features() {
            return Err(Error::Format("feature list does not match model width".into()));
        }
        Ok(a)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks that `d` has the columns this model was trained on.
    pub fn check_dataset(&self, d: &Dataset) -> Result<()> {
        if d.feature_names() != self.feature_names {
            return Err(Error::Schema("input features differ from the trained model's".into()));
        }
        if d.schema_fingerprint() != self.schema_fingerprint {
            return Err(Error::Schema("input schema fingerprint differs from the trained model's".into()));
        }
        Ok(())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::BoostParams;
    use crate::learner::{fit_learner, LearnerSpec, MlpSpec};
    use crate::mlp::{MlpArch, MlpTrainConfig};

    fn data() -> Dataset {
        let n = 60;
        let x: Vec<f64> = (0..n * 2).map(|i| ((i * 7919) % 113) as f64 / 7.0).collect();
        let y = (0..n).map(|i| x[2 * i] * 1.3 - x[2 * i + 1] / 3.0).collect();
        Dataset::numeric(Matrix::new(n, 2, x).unwrap(), y).unwrap()
    }

    fn round_trip(spec: &LearnerSpec) {
        let d = data();
        let m = fit_learner(spec, &d).unwrap();
        let a = ModelArtifact::new(m, &d, d.schema(), LagSpec::none(), 3, sha256_hex(b"cfg")).unwrap();
        let b = ModelArtifact::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, b);
        let p1 = a.predict(d.x()).unwrap();
        let p2 = b.predict(d.x()).unwrap();
        assert!(p1.iter().zip(&p2).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn boosted_and_network_models_round_trip() {
        round_trip(&LearnerSpec::Gbdt(BoostParams { n_estimators: 10, learning_rate: 0.3, min_samples_leaf: 2, ..Default::default() }));
        round_trip(&LearnerSpec::Mlp(MlpSpec {
            arch: MlpArch { hidden_sizes: vec![3] },
            train: MlpTrainConfig { max_epochs: 3, ..Default::default() },
        }));
    }

    #[test]
    fn version_and_kind_checked() {
        let d = data();
        let m = fit_learner(&LearnerSpec::Linear(Default::default()), &d).unwrap();
        let a = ModelArtifact::new(m, &d, d.schema(), LagSpec::none(), 0, String::new()).unwrap();
        let j = a.to_json().unwrap();
        assert!(ModelArtifact::from_json(&j.replace("\"format_version\": 1", "\"format_version\": 99")).is_err());
        assert!(ModelArtifact::from_json(&j.replacen("\"kind\": \"linear\"", "\"kind\": \"ridge\"", 1)).is_err());
        let other = d.select_features(&[1, 0]).unwrap();
        assert!(a.check_dataset(&other).is_err());
        assert!(a.check_dataset(&d).is_ok());
    }
}
