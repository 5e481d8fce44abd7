use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Integer,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamScale {
    #[default]
    Linear,
    Log,
}

/// One searchable hyperparameter. The optimizer works in an internal
/// coordinate: the value itself on linear scale, its logarithm on log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub scale: ParamScale,
}

impl ParamDef {
    pub fn new(name: &str, kind: ParamKind, lower: f64, upper: f64, scale: ParamScale) -> Result<Self> {
        let d = Self {
            name: name.to_string(),
            kind,
            lower,
            upper,
            scale,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn int(name: &str, lower: f64, upper: f64) -> Self {
        Self::new(name, ParamKind::Integer, lower, upper, ParamScale::Linear).expect("valid bounds")
    }

    pub fn real(name: &str, lower: f64, upper: f64) -> Self {
        Self::new(name, ParamKind::Real, lower, upper, ParamScale::Linear).expect("valid bounds")
    }

    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        Self::new(name, ParamKind::Real, lower, upper, ParamScale::Log).expect("valid bounds")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::invalid(&self.name, "bounds must be finite with lower < upper"));
        }
        if self.scale == ParamScale::Log && self.lower <= 0.0 {
            return Err(Error::invalid(&self.name, "log scale needs positive bounds"));
        }
        Ok(())
    }

    /// Bounds in internal coordinates.
    pub fn internal_bounds(&self) -> (f64, f64) {
        match self.scale {
            ParamScale::Linear => (self.lower, self.upper),
            ParamScale::Log => (self.lower.ln(), self.upper.ln()),
        }
    }

    /// Natural value for an internal coordinate (clipped, rounded for integers).
    pub fn to_natural(&self, internal: f64) -> f64 {
        let (lo, hi) = self.internal_bounds();
        let u = internal.clamp(lo, hi);
        let v = match self.scale {
            ParamScale::Linear => u,
            ParamScale::Log => u.exp().clamp(self.lower, self.upper),
        };
        match self.kind {
            ParamKind::Integer => v.round(),
            ParamKind::Real => v,
        }
    }

    pub fn to_internal(&self, natural: f64) -> Result<f64> {
        if !(natural >= self.lower && natural <= self.upper) {
            return Err(Error::invalid(
                &self.name,
                format!("{natural} outside [{}, {}]", self.lower, self.upper),
            ));
        }
        Ok(match self.scale {
            ParamScale::Linear => natural,
            ParamScale::Log => natural.ln(),
        })
    }
}

/// Named record of natural values for internal coordinates `values`.
pub fn encode_params(defs: &[ParamDef], values: &[f64]) -> Result<BTreeMap<String, f64>> {
    if defs.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: defs.len(),
            got: values.len(),
        });
    }
    for (d, &v) in defs.iter().zip(values) {
        let (lo, hi) = d.internal_bounds();
        if !(v >= lo - 1e-12 * (hi - lo) && v <= hi + 1e-12 * (hi - lo)) {
            return Err(Error::invalid(&d.name, format!("internal value {v} outside [{lo}, {hi}]")));
        }
    }
    Ok(defs
        .iter()
        .zip(values)
        .map(|(d, &v)| (d.name.clone(), d.to_natural(v)))
        .collect())
}

/// Internal coordinates for a named record; every def must be present.
pub fn decode_params(defs: &[ParamDef], record: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    defs.iter()
        .map(|d| {
            let v = record
                .get(&d.name)
                .ok_or_else(|| Error::invalid(&d.name, "missing from record"))?;
            d.to_internal(*v)
        })
        .collect()
}
