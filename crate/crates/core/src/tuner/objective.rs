use std::collections::BTreeMap;

use super::space::{encode_params, ParamDef, ParamKind};
use crate::dataset::{temporal_split, Dataset};
use crate::error::{Error, Result};
use crate::learner::{fit_learner, LearnerSpec, Regressor};
use crate::metrics::pearson_r;

/// Search space per learner kind, sized for desk-scale runs.
pub fn default_space(kind: &str) -> Result<Vec<ParamDef>> {
    Ok(match kind {
        "gbdt" => vec![
            ParamDef::int("n_estimators", 50.0, 600.0),
            ParamDef::int("max_depth", 2.0, 12.0),
            ParamDef::log("learning_rate", 0.005, 0.5),
            ParamDef::real("subsample", 0.1, 1.0),
            ParamDef::int("max_leaves", 4.0, 128.0),
        ],
        "ordered_boost" => vec![
            ParamDef::int("n_estimators", 50.0, 600.0),
            ParamDef::int("max_depth", 2.0, 10.0),
            ParamDef::log("learning_rate", 0.005, 0.5),
            ParamDef::real("subsample", 0.1, 1.0),
            ParamDef::real("l2_lambda", 1.0, 60.0),
        ],
        "random_forest" | "extra_trees" => vec![
            ParamDef::int("n_estimators", 10.0, 200.0),
            ParamDef::int("max_depth", 2.0, 16.0),
            ParamDef::int("min_samples_split", 2.0, 12.0),
            ParamDef::int("min_samples_leaf", 1.0, 5.0),
            ParamDef::real("max_features", 0.1, 1.0),
        ],
        other => return Err(Error::Unsupported(format!("no default search space for {other}"))),
    })
}

/// `spec` with the named fields replaced by `record` values.
pub fn apply_params(spec: &LearnerSpec, defs: &[ParamDef], record: &BTreeMap<String, f64>) -> Result<LearnerSpec> {
    let mut v = serde_json::to_value(spec)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::Format("learner spec did not serialize to an object".into()))?;
    for d in defs {
        let x = *record
            .get(&d.name)
            .ok_or_else(|| Error::invalid(&d.name, "missing from record"))?;
        if !obj.contains_key(&d.name) {
            return Err(Error::invalid(&d.name, format!("not a parameter of {}", spec.kind())));
        }
        let val = match d.kind {
            ParamKind::Integer => serde_json::Value::from(x as i64),
            ParamKind::Real => serde_json::Value::from(x),
        };
        obj.insert(d.name.clone(), val);
    }
    serde_json::from_value(v).map_err(|e| Error::invalid("params", e.to_string()))
}

/// Fits on the leading part of a training set and scores Pearson R on the
/// trailing part.
#[derive(Debug, Clone)]
pub struct HoldoutObjective {
    pub fit: Dataset,
    pub valid: Dataset,
    pub base: LearnerSpec,
    pub defs: Vec<ParamDef>,
}

impl HoldoutObjective {
    pub fn spec_for(&self, internal: &[f64]) -> Result<LearnerSpec> {
        let rec = encode_params(&self.defs, internal)?;
        let spec = apply_params(&self.base, &self.defs, &rec)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn score_spec(&self, spec: &LearnerSpec) -> Result<f64> {
        let m = fit_learner(spec, &self.fit)?;
        pearson_r(self.valid.y(), &m.predict(self.valid.x())?)
    }

    /// Holdout R, or NaN when fitting or scoring fails.
    pub fn evaluate(&self, internal: &[f64]) -> f64 {
        self.spec_for(internal)
            .and_then(|s| self.score_spec(&s))
            .unwrap_or(f64::NAN)
    }
}

pub fn holdout_objective(
    train: &Dataset,
    base: &LearnerSpec,
    defs: Vec<ParamDef>,
    valid_fraction: f64,
) -> Result<HoldoutObjective> {
    let (fit, valid) = temporal_split(train, valid_fraction)?;
    Ok(HoldoutObjective {
        fit,
        valid,
        base: base.clone(),
        defs,
    })
}
