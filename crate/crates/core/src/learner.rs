//! Uniform surface over every regressor in the crate.

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};

use crate::boosting::{fit_gbdt_dataset, fit_ordered_boost, BoostModel, BoostParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linear::{fit_linear, LinearModel};
use crate::matrix::Matrix;
use crate::meta::{fit_meta, StackSpec, StackedModel};
use crate::mlp::{fit_mlp, Mlp, MlpArch, MlpTrainConfig};
use crate::trees::{fit_forest, Cart, Forest, ForestMode, ForestParams};

/// Anything that maps a feature matrix to one prediction per row.
pub trait Regressor: Sync {
    fn n_features(&self) -> usize;
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
}

impl Regressor for BoostModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        BoostModel::predict(self, x)
    }
}

impl Regressor for Forest {
    fn n_features(&self) -> usize {
        Forest::n_features(self)
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Forest::predict(self, x)
    }
}

impl Regressor for Cart {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Cart::predict(self, x)
    }
}

impl Regressor for Mlp {
    fn n_features(&self) -> usize {
        self.n_inputs()
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Mlp::predict(self, x)
    }
}

impl Regressor for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        LinearModel::predict(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSpec {
    pub arch: MlpArch,
    pub train: MlpTrainConfig,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            arch: MlpArch::default(),
            train: MlpTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSpec {
    pub l2: f64,
}

impl Default for LinearSpec {
    fn default() -> Self {
        Self { l2: 0.0 }
    }
}

/// A learner kind together with its hyperparameters.
///
/// Deserialization starts from the kind's own defaults and overlays the
/// given keys, so `{kind = "extra_trees"}` gets extra-trees defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Gbdt(BoostParams),
    OrderedBoost(BoostParams),
    RandomForest(ForestParams),
    ExtraTrees(ForestParams),
    Mlp(MlpSpec),
    Linear(LinearSpec),
    Ridge(LinearSpec),
    Stack(Box<StackSpec>),
}

fn overlay<T: Serialize + DeserializeOwned>(
    base: T,
    patch: serde_json::Map<String, serde_json::Value>,
) -> std::result::Result<T, serde_json::Error> {
    let mut v = serde_json::to_value(base)?;
    if let serde_json::Value::Object(m) = &mut v {
        for (k, val) in patch {
            m.insert(k, val);
        }
    }
    serde_json::from_value(v)
}

impl<'de> Deserialize<'de> for LearnerSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let serde_json::Value::Object(mut m) = v else {
            return Err(D::Error::custom("learner spec must be a table"));
        };
        let kind = match m.remove("kind") {
            Some(serde_json::Value::String(k)) => k,
            _ => return Err(D::Error::missing_field("kind")),
        };
        let spec = match kind.as_str() {
            "gbdt" => overlay(BoostParams::default(), m).map(LearnerSpec::Gbdt),
            "ordered_boost" => overlay(BoostParams::ordered_default(), m).map(LearnerSpec::OrderedBoost),
            "random_forest" => overlay(ForestParams::random_forest(), m).map(LearnerSpec::RandomForest),
            "extra_trees" => overlay(ForestParams::extra_trees(), m).map(LearnerSpec::ExtraTrees),
            "mlp" => overlay(MlpSpec::default(), m).map(LearnerSpec::Mlp),
            "linear" => overlay(LinearSpec::default(), m).map(LearnerSpec::Linear),
            "ridge" => overlay(LinearSpec { l2: 1.0 }, m).map(LearnerSpec::Ridge),
            "stack" => overlay(StackSpec::default(), m).map(|s| LearnerSpec::Stack(Box::new(s))),
            other => {
                return Err(D::Error::unknown_variant(
                    other,
                    &["gbdt", "ordered_boost", "random_forest", "extra_trees", "mlp", "linear", "ridge", "stack"],
                ))
            }
        };
        spec.map_err(D::Error::custom)
    }
}

impl LearnerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LearnerSpec::Gbdt(_) => "gbdt",
            LearnerSpec::OrderedBoost(_) => "ordered_boost",
            LearnerSpec::RandomForest(_) => "random_forest",
            LearnerSpec::ExtraTrees(_) => "extra_trees",
            LearnerSpec::Mlp(_) => "mlp",
            LearnerSpec::Linear(_) => "linear",
            LearnerSpec::Ridge(_) => "ridge",
            LearnerSpec::Stack(_) => "stack",
        }
    }

    /// Same spec with every nested seed replaced by `seed`.
    pub fn with_seed(&self, seed: u64) -> LearnerSpec {
        let mut s = self.clone();
        match &mut s {
            LearnerSpec::Gbdt(p) | LearnerSpec::OrderedBoost(p) => p.seed = seed,
            LearnerSpec::RandomForest(p) | LearnerSpec::ExtraTrees(p) => p.seed = seed,
            LearnerSpec::Mlp(p) => p.train.seed = seed,
            LearnerSpec::Linear(_) | LearnerSpec::Ridge(_) => {}
            LearnerSpec::Stack(p) => p.seed = seed,
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Gbdt(p) | LearnerSpec::OrderedBoost(p) => p.validate(),
            LearnerSpec::RandomForest(p) | LearnerSpec::ExtraTrees(p) => p.validate(),
            LearnerSpec::Mlp(p) => {
                if p.arch.hidden_sizes.contains(&0) {
                    return Err(Error::invalid("hidden_sizes", "layer sizes must be positive"));
                }
                p.train.validate()
            }
            LearnerSpec::Linear(p) | LearnerSpec::Ridge(p) => {
                if p.l2 >= 0.0 && p.l2.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("l2", "must be finite and >= 0"))
                }
            }
            LearnerSpec::Stack(s) => s.validate(),
        }
    }
}

/// A fitted learner of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Gbdt(BoostModel),
    OrderedBoost(BoostModel),
    RandomForest(Forest),
    ExtraTrees(Forest),
    Mlp(Mlp),
    Linear(LinearModel),
    Ridge(LinearModel),
    Stack(Box<StackedModel>),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Gbdt(_) => "gbdt",
            Model::OrderedBoost(_) => "ordered_boost",
            Model::RandomForest(_) => "random_forest",
            Model::ExtraTrees(_) => "extra_trees",
            Model::Mlp(_) => "mlp",
            Model::Linear(_) => "linear",
            Model::Ridge(_) => "ridge",
            Model::Stack(_) => "stack",
        }
    }

    fn inner(&self) -> &dyn Regressor {
        match self {
            Model::Gbdt(m) | Model::OrderedBoost(m) => m,
            Model::RandomForest(m) | Model::ExtraTrees(m) => m,
            Model::Mlp(m) => m,
            Model::Linear(m) | Model::Ridge(m) => m,
            Model::Stack(m) => m.as_ref(),
        }
    }

    /// Per-iteration training loss, for learners that record one.
    pub fn loss_trace(&self) -> Option<&[f64]> {
        match self {
            Model::Gbdt(m) | Model::OrderedBoost(m) => Some(&m.train_loss),
            Model::Mlp(m) => Some(&m.loss_trace),
            _ => None,
        }
    }
}

impl Regressor for Model {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.inner().predict(x)
    }
}

/// Fits `spec` on `train`; failures carry the learner kind.
pub fn fit_learner(spec: &LearnerSpec, train: &Dataset) -> Result<Model> {
    let wrap = |e: Error| match e {
        e @ Error::Learner { .. } => e,
        e => Error::Learner {
            learner: spec.kind().to_string(),
            source: Box::new(e),
        },
    };
    let m = match spec {
        LearnerSpec::Gbdt(p) => fit_gbdt_dataset(train, p).map(Model::Gbdt),
        LearnerSpec::OrderedBoost(p) => fit_ordered_boost(train, p).map(Model::OrderedBoost),
        LearnerSpec::RandomForest(p) => {
            let p = ForestParams { mode: ForestMode::RandomForest, ..p.clone() };
            fit_forest(train, &p).map(Model::RandomForest)
        }
        LearnerSpec::ExtraTrees(p) => {
            let p = ForestParams { mode: ForestMode::ExtraTrees, ..p.clone() };
            fit_forest(train, &p).map(Model::ExtraTrees)
        }
        LearnerSpec::Mlp(p) => fit_mlp(train.x(), train.y(), &p.arch, &p.train).map(Model::Mlp),
        LearnerSpec::Linear(p) => fit_linear(train.x(), train.y(), p.l2).map(Model::Linear),
        LearnerSpec::Ridge(p) => fit_linear(train.x(), train.y(), p.l2).map(Model::Ridge),
        LearnerSpec::Stack(s) => fit_meta(train, s).map(|m| Model::Stack(Box::new(m))),
    };
    m.map_err(wrap)
}
