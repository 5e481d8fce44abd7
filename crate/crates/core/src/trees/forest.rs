use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::cart::{grow, Presorted, Splitter, TreeParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestMode {
    /// Bootstrap rows, best midpoint split over a random feature subset.
    RandomForest,
    /// All rows, one uniform random threshold per candidate feature.
    ExtraTrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each node.
    pub max_features: f64,
    pub mode: ForestMode,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self::random_forest()
    }
}

impl ForestParams {
    pub fn random_forest() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: 0.33,
            mode: ForestMode::RandomForest,
            seed: 0,
        }
    }

    pub fn extra_trees() -> Self {
        Self {
            max_features: 1.0,
            mode: ForestMode::ExtraTrees,
            ..Self::random_forest()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::invalid("n_estimators", "must be >= 1"));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(Error::invalid("max_features", "must be in (0, 1]"));
        }
        self.tree_params().validate()
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
        }
    }

    fn mtry(&self, n_features: usize) -> usize {
        ((self.max_features * n_features as f64 + 1e-9).floor() as usize).clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    n_features: usize,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::invalid("trees", "forest needs at least one tree"));
        }
        if trees.iter().any(|t| t.max_feature().is_some_and(|f| f >= n_features)) {
            return Err(Error::Format("tree references a feature out of range".into()));
        }
        Ok(Self { trees, n_features })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of member predictions, summed in tree order.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.n_features)?;
        let k = self.trees.len() as f64;
        Ok(crate::exec::map_indexed(x.n_rows(), |i| {
            let row = x.row(i);
            let mut s = 0.0;
            for t in &self.trees {
                s += t.predict_row(row);
            }
            s / k
        }))
    }

    pub fn feature_importance(&self) -> Vec<f64> {
        super::impurity_importance(&self.trees, self.n_features)
    }
}

/// Fits a random forest or extra-trees ensemble. Tree `k` draws from its own
/// seeded stream, so the result does not depend on the worker count.
pub fn fit_forest(train: &Dataset, p: &ForestParams) -> Result<Forest> {
    p.validate()?;
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let pre = Presorted::new(train.x());
    let tp = p.tree_params();
    let mtry = p.mtry(train.n_features());
    let trees = crate::exec::map_indexed(p.n_estimators, |k| {
        let mut rng = rng::stream(p.seed, k as u64);
        match p.mode {
            ForestMode::RandomForest => {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                grow(&pre, train.y(), &counts, &tp, Splitter::Best { mtry }, Some(&mut rng))
            }
            ForestMode::ExtraTrees => {
                let counts = vec![1u32; n];
                grow(&pre, train.y(), &counts, &tp, Splitter::Random { mtry }, Some(&mut rng))
            }
        }
    });
    Forest::from_trees(trees, train.n_features())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnKind, ColumnSchema};
    use crate::tree::Node;

    fn noisy(n: usize, seed: u64) -> Dataset {
        let mut r = rng::stream(seed, 99);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = r.random_range(-1.0..1.0);
            let b: f64 = r.random_range(-1.0..1.0);
            let c: f64 = r.random_range(-1.0..1.0);
            data.extend([a, b, c]);
            y.push(3.0 * a + (2.0 * b).sin() + 0.1 * r.random_range(-1.0..1.0));
        }
        let schema = ["a", "b", "c"]
            .iter()
            .map(|s| ColumnSchema::feature(*s, ColumnKind::Numeric))
            .collect();
        Dataset::new(schema, Matrix::new(n, 3, data).unwrap(), y, None, "y").unwrap()
    }

    fn small(mode: ForestMode) -> ForestParams {
        ForestParams {
            n_estimators: 12,
            max_depth: Some(6),
            mode,
            max_features: 0.67,
            seed: 5,
            ..ForestParams::default()
        }
    }

    #[test]
    fn mean_of_two_trees() {
        let f = Forest::from_trees(vec![Tree::leaf(2.0), Tree::leaf(4.0)], 1).unwrap();
        let x = Matrix::new(1, 1, vec![0.3]).unwrap();
        assert_eq!(f.predict(&x).unwrap(), vec![3.0]);
    }

    #[test]
    fn single_tree_forest_equals_tree() {
        let d = noisy(200, 1);
        let mut p = small(ForestMode::RandomForest);
        p.n_estimators = 1;
        let f = fit_forest(&d, &p).unwrap();
        assert_eq!(f.predict(d.x()).unwrap(), f.trees()[0].predict(d.x()));
    }

    #[test]
    fn deterministic_per_seed() {
        for mode in [ForestMode::RandomForest, ForestMode::ExtraTrees] {
            let d = noisy(300, 2);
            let a = fit_forest(&d, &small(mode)).unwrap();
            let b = fit_forest(&d, &small(mode)).unwrap();
            assert_eq!(a, b);
            let mut p = small(mode);
            p.seed = 6;
            assert_ne!(a, fit_forest(&d, &p).unwrap());
        }
    }

    #[test]
    fn predictions_within_target_range() {
        for mode in [ForestMode::RandomForest, ForestMode::ExtraTrees] {
            let d = noisy(300, 3);
            let f = fit_forest(&d, &small(mode)).unwrap();
            let lo = d.y().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = d.y().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let probe = noisy(100, 4);
            for p in f.predict(probe.x()).unwrap() {
                assert!(lo <= p && p <= hi);
            }
        }
    }

    #[test]
    fn forest_prediction_is_member_mean() {
        let d = noisy(150, 7);
        let f = fit_forest(&d, &small(ForestMode::ExtraTrees)).unwrap();
        let got = f.predict(d.x()).unwrap();
        for (i, row) in d.x().rows().enumerate() {
            let mut s = 0.0;
            for t in f.trees() {
                s += t.predict_row(row);
            }
            assert_eq!(got[i], s / f.trees().len() as f64);
        }
    }

    #[test]
    fn extra_trees_thresholds_within_node_range() {
        let d = noisy(200, 8);
        let f = fit_forest(&d, &small(ForestMode::ExtraTrees)).unwrap();
        for t in f.trees() {
            // walk with the row set of each node
            let mut stack = vec![(0usize, (0..d.n_rows()).collect::<Vec<_>>())];
            while let Some((id, rows)) = stack.pop() {
                if let Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } = &t.nodes()[id]
                {
                    let vals: Vec<f64> = rows.iter().map(|&r| d.x().get(r, *feature)).collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    assert!(lo <= *threshold && *threshold <= hi);
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.iter().partition(|&&r| d.x().get(r, *feature) < *threshold);
                    stack.push((*left, l));
                    stack.push((*right, r));
                }
            }
        }
    }

    #[test]
    fn unused_feature_has_zero_importance() {
        // target depends on feature 0 only; stumps never pick the constant feature 2
        let n = 50;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            data.extend([i as f64, (i % 7) as f64, 1.0]);
            y.push(if i < 25 { 0.0 } else { 10.0 });
        }
        let schema = ["a", "b", "c"]
            .iter()
            .map(|s| ColumnSchema::feature(*s, ColumnKind::Numeric))
            .collect();
        let d = Dataset::new(schema, Matrix::new(n, 3, data).unwrap(), y, None, "y").unwrap();
        let p = ForestParams {
            n_estimators: 5,
            max_depth: Some(1),
            ..ForestParams::default()
        };
        let imp = fit_forest(&d, &p).unwrap().feature_importance();
        assert_eq!(imp[2], 0.0);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn copy_of_target_beats_noise() {
        for seed in 0..10 {
            let mut r = rng::stream(seed, 1);
            let n = 120;
            let y: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
            let mut data = Vec::new();
            for &v in &y {
                data.extend([v, r.random_range(0.0..10.0)]);
            }
            let schema = ["copy", "noise"]
                .iter()
                .map(|s| ColumnSchema::feature(*s, ColumnKind::Numeric))
                .collect();
            let d = Dataset::new(schema, Matrix::new(n, 2, data).unwrap(), y, None, "y").unwrap();
            for mode in [ForestMode::RandomForest, ForestMode::ExtraTrees] {
                let p = ForestParams {
                    n_estimators: 10,
                    max_depth: Some(4),
                    max_features: 1.0,
                    mode,
                    seed,
                    ..ForestParams::default()
                };
                let imp = fit_forest(&d, &p).unwrap().feature_importance();
                assert!(imp[0] > imp[1], "seed {seed}: {imp:?}");
            }
        }
    }

    #[test]
    fn validation() {
        let d = noisy(10, 0);
        let mut p = ForestParams::default();
        p.n_estimators = 0;
        assert!(fit_forest(&d, &p).is_err());
        let mut p = ForestParams::default();
        p.max_features = 0.0;
        assert!(fit_forest(&d, &p).is_err());
        let mut p = ForestParams::default();
        p.min_samples_split = 1;
        assert!(fit_forest(&d, &p).is_err());
    }
}
