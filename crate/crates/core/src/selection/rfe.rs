use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learner::{fit_learner, LearnerSpec, Model, Regressor};
use crate::metrics::{mae, pearson_r};

/// Importance scores of a fitted model over its input features.
///
/// Trees report split-gain totals; linear models report `|w_j| * std(x_j)`
/// on `train`; a stack defers to its gradient-boosting member (or, failing
/// that, its first member).
pub fn feature_importance(model: &Model, train: &Dataset) -> Result<Vec<f64>> {
    match model {
        Model::Gbdt(m) | Model::OrderedBoost(m) => Ok(m.feature_importance()),
        Model::RandomForest(m) | Model::ExtraTrees(m) => Ok(m.feature_importance()),
        Model::Linear(m) | Model::Ridge(m) => {
            let n = train.n_rows() as f64;
            Ok(m.weights
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let col = train.x().column(j);
                    let mean = col.iter().sum::<f64>() / n;
                    let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                    w.abs() * sd
                })
                .collect())
        }
        Model::Stack(s) => {
            let member = s
                .sub_models
                .iter()
                .find(|m| m.kind() == "gbdt")
                .unwrap_or(&s.sub_models[0]);
            feature_importance(member, train)
        }
        Model::Mlp(_) => Err(Error::Unsupported("mlp has no feature importance for elimination".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    pub n_features: usize,
    pub valid_r: Option<f64>,
    pub valid_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Surviving feature indices, ascending.
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    /// 1 for survivors; features dropped in round `r` of `R` get `R - r + 2`.
    pub ranking: Vec<usize>,
    pub steps: Vec<RfeStep>,
}

/// Drops the least important features until `target_k` remain, recording
/// validation R and MAE at every feature count visited.
pub fn rfe(train: &Dataset, valid: &Dataset, spec: &LearnerSpec, target_k: usize, step: usize) -> Result<RfeResult> {
    let nf = train.n_features();
    if valid.n_features() != nf {
        return Err(Error::DimensionMismatch { expected: nf, got: valid.n_features() });
    }
    if target_k < 1 || target_k > nf {
        return Err(Error::invalid("target_k", format!("must be in [1, {nf}]")));
    }
    if step < 1 {
        return Err(Error::invalid("step", "must be >= 1"));
    }
    if spec.kind() == "mlp" {
        return Err(Error::Unsupported("mlp has no feature importance for elimination".into()));
    }
    let mut current: Vec<usize> = (0..nf).collect();
    let mut dropped_in: Vec<Option<usize>> = vec![None; nf];
    let mut steps = Vec::new();
    let mut round = 0;
    loop {
        let tr = train.select_features(&current)?;
        let model = fit_learner(spec, &tr)?;
        let pred = model.predict(valid.select_features(&current)?.x())?;
        steps.push(RfeStep {
            n_features: current.len(),
            valid_r: pearson_r(valid.y(), &pred).ok(),
            valid_mae: mae(valid.y(), &pred)?,
        });
        if current.len() == target_k {
            break;
        }
        let imp = feature_importance(&model, &tr)?;
        let mut order: Vec<usize> = (0..current.len()).collect();
        // least important first; among equals the later column goes first
        order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(b.cmp(&a)));
        let k = step.min(current.len() - target_k);
        round += 1;
        let mut drop: Vec<usize> = order[..k].to_vec();
        drop.sort_unstable();
        for &p in &drop {
            dropped_in[current[p]] = Some(round);
        }
        current = current
            .iter()
            .enumerate()
            .filter(|(p, _)| drop.binary_search(p).is_err())
            .map(|(_, &f)| f)
            .collect();
    }
    let ranking = dropped_in
        .iter()
        .map(|d| d.map_or(1, |r| round - r + 2))
        .collect();
    let names = train.feature_names();
    Ok(RfeResult {
        selected_names: current.iter().map(|&j| names[j].clone()).collect(),
        selected: current,
        ranking,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::linear::LinearModel;
    use crate::matrix::Matrix;
    use crate::rng;
    use crate::trees::ForestParams;

    fn copy_and_noise(n: usize, seed: u64) -> (Dataset, Dataset) {
        let mut r = rng::stream(seed, 2);
        let mut x = Vec::with_capacity(n * 5);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let t: f64 = r.random_range(0.0..10.0);
            y.push(t);
            x.push(t);
            for _ in 0..4 {
                x.push(r.random_range(0.0..10.0));
            }
        }
        let d = Dataset::numeric(Matrix::new(n, 5, x).unwrap(), y).unwrap();
        (d.slice_rows(0, n * 3 / 4), d.slice_rows(n * 3 / 4, n))
    }

    fn forest() -> LearnerSpec {
        LearnerSpec::RandomForest(ForestParams { n_estimators: 10, ..ForestParams::random_forest() })
    }

    #[test]
    fn finds_the_copied_target() {
        let hits = (0..10)
            .filter(|&s| {
                let (tr, va) = copy_and_noise(200, s);
                let spec = forest().with_seed(s);
                rfe(&tr, &va, &spec, 1, 1).unwrap().selected == vec![0]
            })
            .count();
        assert!(hits >= 9, "{hits}/10");
    }

    #[test]
    fn step_arithmetic() {
        let (tr, va) = copy_and_noise(120, 1);
        let r = rfe(&tr, &va, &forest(), 1, 2).unwrap();
        let counts: Vec<usize> = r.steps.iter().map(|s| s.n_features).collect();
        assert_eq!(counts, vec![5, 3, 1]);
        let mut rk = r.ranking.clone();
        rk.sort_unstable();
        assert_eq!(rk, vec![1, 2, 2, 3, 3]);
    }

    #[test]
    fn keeping_everything_is_identity() {
        let (tr, va) = copy_and_noise(80, 2);
        let r = rfe(&tr, &va, &forest(), 5, 1).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.ranking, vec![1; 5]);
        assert_eq!(r.steps.len(), 1);
    }

    #[test]
    fn rejects_mlp_and_bad_arguments() {
        let (tr, va) = copy_and_noise(40, 3);
        assert!(rfe(&tr, &va, &LearnerSpec::Mlp(Default::default()), 1, 1).is_err());
        assert!(rfe(&tr, &va, &forest(), 0, 1).is_err());
        assert!(rfe(&tr, &va, &forest(), 2, 0).is_err());
    }

    #[test]
    fn linear_importance_scales_by_spread() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 10.0], [4.0, 20.0]]).unwrap();
        let d = Dataset::numeric(x, vec![0.0, 1.0, 2.0]).unwrap();
        let m = Model::Linear(LinearModel { weights: vec![1.0, 1.0], intercept: 0.0 });
        let imp = feature_importance(&m, &d).unwrap();
        assert!((imp[1] / imp[0] - 5.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn ranking_bookkeeping(seed in 0u64..500, k in 1usize..5, step in 1usize..4) {
            let (tr, va) = copy_and_noise(60, seed);
            let r = rfe(&tr, &va, &forest().with_seed(seed), k, step).unwrap();
            prop_assert_eq!(r.selected.len(), k);
            prop_assert_eq!(r.ranking.iter().filter(|&&v| v == 1).count(), k);
            for (j, &rank) in r.ranking.iter().enumerate() {
                prop_assert_eq!(rank == 1, r.selected.contains(&j));
            }
            let rounds = r.steps.len() - 1;
            let mut per_round = vec![0usize; rounds + 2];
            for &rank in &r.ranking {
                prop_assert!(rank >= 1 && rank <= rounds + 1);
                per_round[rank] += 1;
            }
            for c in &per_round[2..] {
                prop_assert!(*c >= 1 && *c <= step);
            }
        }
    }
}
