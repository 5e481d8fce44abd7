use rand::seq::index;

use super::grower::{grow, BinnedView};
use super::histogram::HistLayout;
use super::newton::{leaf_newton_value, GradHess};
use super::{goss_sample, mean, mse, BoostModel, BoostParams};
use crate::dataset::{bin_features, BinnedDataset, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// Bins `train` with `p.max_bins` and fits [`fit_gbdt`].
pub fn fit_gbdt_dataset(train: &Dataset, p: &BoostParams) -> Result<BoostModel> {
    p.validate()?;
    let binned = bin_features(train, p.max_bins)?;
    fit_gbdt(&binned, p)
}

/// Histogram gradient boosting on squared error with Newton leaf values.
pub fn fit_gbdt(train: &BinnedDataset, p: &BoostParams) -> Result<BoostModel> {
    p.validate()?;
    let d = train.source();
    let n = d.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let y = d.y();
    let x = d.x();
    let layout = HistLayout::new(train.mapper());
    let view = BinnedView {
        mapper: train.mapper(),
        layout: &layout,
        codes: train.codes(),
        n_rows: n,
    };
    let cfg = p.grow_config();
    let base = mean(y);
    let mut pred = vec![base; n];
    let mut trees = Vec::with_capacity(p.n_estimators);
    let mut loss = Vec::with_capacity(p.n_estimators);

    for t in 0..p.n_estimators {
        let GradHess { mut g, mut h } = GradHess::squared_error(&pred, y);
        let rows: Vec<usize> = if p.goss_active() {
            let abs: Vec<f64> = g.iter().map(|v| v.abs()).collect();
            let seed = rng::derive_seed(p.seed, t as u64);
            let (rows, w) = goss_sample(&abs, p.goss_top_fraction, p.goss_rand_fraction, seed)?;
            let mut weight = vec![0.0; n];
            for (&r, &wr) in rows.iter().zip(&w) {
                weight[r] = wr;
            }
            for i in 0..n {
                g[i] *= weight[i];
                h[i] *= weight[i];
            }
            rows
        } else if p.subsample < 1.0 {
            let k = ((p.subsample * n as f64).ceil() as usize).clamp(1, n);
            let mut r = rng::stream(p.seed, t as u64);
            let mut rows = index::sample(&mut r, n, k).into_vec();
            rows.sort_unstable();
            rows
        } else {
            (0..n).collect()
        };

        let mut grown = grow(&view, rows, &g, &h, &cfg);
        for (leaf, members) in &grown.leaves {
            let (mut sg, mut sh) = (0.0, 0.0);
            for &r in members {
                sg += g[r];
                sh += h[r];
            }
            grown.tree.set_leaf_value(*leaf, leaf_newton_value(sg, sh, p.l2_lambda)?);
        }
        for (i, pi) in pred.iter_mut().enumerate() {
            *pi += p.learning_rate * grown.tree.predict_row(x.row(i));
        }
        let l = mse(&pred, y);
        if !l.is_finite() {
            return Err(Error::Numeric(format!("training loss became {l} at iteration {t}")));
        }
        loss.push(l);
        trees.push(grown.tree);
    }

    let mut model = BoostModel::new(base, p.learning_rate, trees, d.n_features());
    model.train_loss = loss;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnKind, ColumnSchema};
    use crate::matrix::Matrix;
    use rand::Rng as _;

    fn line(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Dataset::new(
            vec![ColumnSchema::feature("x", ColumnKind::Numeric)],
            Matrix::new(n, 1, x.clone()).unwrap(),
            x,
            None,
            "y",
        )
        .unwrap()
    }

    fn noisy(n: usize, seed: u64) -> Dataset {
        let mut r = rng::stream(seed, 7);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = r.random_range(-2.0..2.0);
            let b: f64 = r.random_range(-2.0..2.0);
            data.extend([a, b]);
            y.push(a * a + b + r.random_range(-0.5..0.5));
        }
        let schema = ["a", "b"]
            .iter()
            .map(|s| ColumnSchema::feature(*s, ColumnKind::Numeric))
            .collect();
        Dataset::new(schema, Matrix::new(n, 2, data).unwrap(), y, None, "y").unwrap()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn zero_rate_predicts_mean() {
        let d = noisy(100, 1);
        let p = BoostParams {
            learning_rate: 0.0,
            n_estimators: 5,
            min_samples_leaf: 2,
            ..BoostParams::default()
        };
        let m = fit_gbdt_dataset(&d, &p).unwrap();
        let mu = mean(d.y());
        assert!(m.predict(d.x()).unwrap().iter().all(|&v| v == mu));
    }

    #[test]
    fn monotone_line_is_learned() {
        let d = line(200);
        let p = BoostParams {
            learning_rate: 0.1,
            n_estimators: 50,
            max_leaves: 8,
            min_samples_leaf: 2,
            ..BoostParams::default()
        };
        let m = fit_gbdt_dataset(&d, &p).unwrap();
        assert!(pearson(&m.predict(d.x()).unwrap(), d.y()) > 0.99);
    }

    #[test]
    fn train_loss_non_increasing() {
        for seed in 0..5 {
            let d = noisy(300, seed);
            let p = BoostParams {
                learning_rate: 0.1,
                n_estimators: 200,
                max_leaves: 15,
                min_samples_leaf: 5,
                l2_lambda: 1.0,
                seed,
                ..BoostParams::default()
            };
            let m = fit_gbdt_dataset(&d, &p).unwrap();
            assert_eq!(m.train_loss.len(), 200);
            assert!(m.train_loss.windows(2).all(|w| w[1] <= w[0]));
            let direct = mse(&m.predict(d.x()).unwrap(), d.y());
            assert!((direct - m.train_loss[199]).abs() < 1e-9);
        }
    }

    #[test]
    fn leaf_limits_respected() {
        let d = noisy(400, 2);
        let p = BoostParams {
            learning_rate: 0.1,
            n_estimators: 10,
            max_leaves: 7,
            max_depth: Some(3),
            min_samples_leaf: 10,
            ..BoostParams::default()
        };
        let m = fit_gbdt_dataset(&d, &p).unwrap();
        for t in &m.trees {
            assert!(t.n_leaves() <= 7);
            assert!(t.depth() <= 3);
        }
    }

    #[test]
    fn goss_and_subsample_are_seeded() {
        let d = noisy(300, 3);
        for p in [
            BoostParams {
                learning_rate: 0.1,
                n_estimators: 20,
                goss_top_fraction: 0.2,
                goss_rand_fraction: 0.1,
                min_samples_leaf: 5,
                seed: 4,
                ..BoostParams::default()
            },
            BoostParams {
                learning_rate: 0.1,
                n_estimators: 20,
                subsample: 0.5,
                min_samples_leaf: 5,
                seed: 4,
                ..BoostParams::default()
            },
        ] {
            let a = fit_gbdt_dataset(&d, &p).unwrap();
            assert_eq!(a, fit_gbdt_dataset(&d, &p).unwrap());
            let other = BoostParams { seed: 5, ..p.clone() };
            assert_ne!(a, fit_gbdt_dataset(&d, &other).unwrap());
            assert!(pearson(&a.predict(d.x()).unwrap(), d.y()) > 0.8);
        }
    }
}
