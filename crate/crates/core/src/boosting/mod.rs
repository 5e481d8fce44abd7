//! Histogram gradient boosting (Newton leaves, leaf-wise growth, GOSS) and
//! ordered boosting with ordered target statistics for categoricals.

mod gbdt;
mod goss;
mod grower;
mod histogram;
mod newton;
mod ordered;

use serde::{Deserialize, Serialize};

pub use gbdt::{fit_gbdt, fit_gbdt_dataset};
pub use goss::goss_sample;
pub use grower::Growth;
pub use histogram::{Cell, HistLayout, HistogramSet};
pub use newton::{leaf_newton_value, split_gain, GradHess};
pub use ordered::{
    fit_ordered_boost, fit_ordered_boost_with_permutations, ordered_leaf_updates,
    ordered_target_statistic, plain_leaf_updates,
};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostMode {
    /// Leaf updates average every same-leaf row.
    Plain,
    /// Leaf updates for a row average only rows earlier in the permutation.
    Ordered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub max_depth: Option<usize>,
    /// Row fraction per iteration; ignored while GOSS is active.
    pub subsample: f64,
    pub l2_lambda: f64,
    pub min_split_gain: f64,
    pub min_samples_leaf: usize,
    pub goss_top_fraction: f64,
    pub goss_rand_fraction: f64,
    pub mode: BoostMode,
    pub n_permutations: usize,
    /// Smoothing weight of the prior in target statistics.
    pub ts_prior_weight: f64,
    pub max_bins: usize,
    pub growth: Growth,
    pub seed: u64,
}

impl Default for BoostParams {
    /// 50 iterations at rate 0.001, 100 leaves, depth 10.
    fn default() -> Self {
        Self {
            n_estimators: 50,
            learning_rate: 0.001,
            max_leaves: 100,
            max_depth: Some(10),
            subsample: 1.0,
            l2_lambda: 0.0,
            min_split_gain: 0.0,
            min_samples_leaf: 20,
            goss_top_fraction: 1.0,
            goss_rand_fraction: 0.0,
            mode: BoostMode::Plain,
            n_permutations: 4,
            ts_prior_weight: 1.0,
            max_bins: 255,
            growth: Growth::LeafWise,
            seed: 0,
        }
    }
}

impl BoostParams {
    /// Ordered boosting defaults: 1200 depth-6 trees at rate 0.01, L2 3.
    pub fn ordered_default() -> Self {
        Self {
            n_estimators: 1200,
            learning_rate: 0.01,
            max_leaves: 64,
            max_depth: Some(6),
            l2_lambda: 3.0,
            min_samples_leaf: 1,
            mode: BoostMode::Ordered,
            growth: Growth::DepthWise,
            ..Self::default()
        }
    }

    pub fn goss_active(&self) -> bool {
        self.goss_top_fraction < 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.learning_rate) {
            return Err(Error::invalid("learning_rate", "must be finite and >= 0"));
        }
        if self.max_leaves < 2 {
            return Err(Error::invalid("max_leaves", "must be >= 2"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample", "must be in (0, 1]"));
        }
        if !finite_nonneg(self.l2_lambda) {
            return Err(Error::invalid("l2_lambda", "must be finite and >= 0"));
        }
        if !finite_nonneg(self.min_split_gain) {
            return Err(Error::invalid("min_split_gain", "must be finite and >= 0"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf", "must be >= 1"));
        }
        let (a, b) = (self.goss_top_fraction, self.goss_rand_fraction);
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a + b > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "goss_top_fraction",
                "GOSS fractions must lie in [0, 1] with a + b <= 1",
            ));
        }
        if a < 1.0 && b <= 0.0 {
            return Err(Error::invalid("goss_rand_fraction", "must be > 0 when GOSS is active"));
        }
        if self.n_permutations < 1 {
            return Err(Error::invalid("n_permutations", "must be >= 1"));
        }
        if !(self.ts_prior_weight > 0.0 && self.ts_prior_weight.is_finite()) {
            return Err(Error::invalid("ts_prior_weight", "must be > 0"));
        }
        if !(2..=u16::MAX as usize).contains(&self.max_bins) {
            return Err(Error::invalid("max_bins", "must be in [2, 65535]"));
        }
        Ok(())
    }

    pub(crate) fn grow_config(&self) -> grower::GrowConfig {
        grower::GrowConfig {
            max_leaves: self.max_leaves,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            lambda: self.l2_lambda,
            gamma: self.min_split_gain,
            growth: self.growth,
        }
    }
}

/// Target-statistic encoding of one categorical feature, applied at
/// prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEncoding {
    pub feature: usize,
    /// Encoded value per integer code.
    pub values: Vec<f64>,
    /// Value for codes never seen in training.
    pub prior: f64,
}

impl CategoryEncoding {
    pub fn encode(&self, code: f64) -> f64 {
        if code >= 0.0 && code.fract() == 0.0 && (code as usize) < self.values.len() {
            self.values[code as usize]
        } else {
            self.prior
        }
    }
}

/// Additive tree ensemble: `base_score + learning_rate * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    #[serde(default)]
    pub encoders: Vec<CategoryEncoding>,
    /// Training mean squared error after each iteration.
    #[serde(default)]
    pub train_loss: Vec<f64>,
}

impl BoostModel {
    pub fn new(base_score: f64, learning_rate: f64, trees: Vec<Tree>, n_features: usize) -> Self {
        Self {
            base_score,
            learning_rate,
            trees,
            n_features,
            encoders: Vec::new(),
            train_loss: Vec::new(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.n_features)?;
        Ok(crate::exec::map_indexed(x.n_rows(), |i| {
            if self.encoders.is_empty() {
                self.predict_row(x.row(i))
            } else {
                let mut row = x.row(i).to_vec();
                for e in &self.encoders {
                    row[e.feature] = e.encode(row[e.feature]);
                }
                self.predict_row(&row)
            }
        }))
    }

    /// Prediction for an already-encoded row.
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut p = self.base_score;
        for t in &self.trees {
            p += self.learning_rate * t.predict_row(row);
        }
        p
    }

    pub fn feature_importance(&self) -> Vec<f64> {
        crate::trees::impurity_importance(&self.trees, self.n_features)
    }
}

pub(crate) fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Node;

    #[test]
    fn zero_iteration_model_is_constant() {
        let m = BoostModel::new(4.5, 0.1, vec![], 2);
        let x = Matrix::new(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![4.5; 3]);
    }

    #[test]
    fn zero_leaf_tree_changes_nothing() {
        let stump = Tree::from_nodes(vec![
            Node::Split {
                feature: 0,
                threshold: 1.5,
                left: 1,
                right: 2,
                gain: 1.0,
            },
            Node::Leaf {
                value: -2.0,
                n_samples: 1,
            },
            Node::Leaf {
                value: 6.0,
                n_samples: 1,
            },
        ])
        .unwrap();
        let x = Matrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        let m = BoostModel::new(1.0, 0.5, vec![stump.clone()], 1);
        // hand evaluation: 1 + 0.5*(-2) = 0 and 1 + 0.5*6 = 4
        assert_eq!(m.predict(&x).unwrap(), vec![0.0, 4.0]);
        let m2 = BoostModel::new(1.0, 0.5, vec![stump, Tree::leaf(0.0)], 1);
        assert_eq!(m2.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn params_validation() {
        assert!(BoostParams::default().validate().is_ok());
        assert!(BoostParams::ordered_default().validate().is_ok());
        let bad = [
            BoostParams { max_leaves: 1, ..Default::default() },
            BoostParams { subsample: 0.0, ..Default::default() },
            BoostParams { goss_top_fraction: 0.6, goss_rand_fraction: 0.6, ..Default::default() },
            BoostParams { goss_top_fraction: 0.5, goss_rand_fraction: 0.0, ..Default::default() },
            BoostParams { n_permutations: 0, ..Default::default() },
            BoostParams { learning_rate: -0.1, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
