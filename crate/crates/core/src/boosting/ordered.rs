use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::grower::{grow, BinnedView};
use super::histogram::HistLayout;
use super::newton::leaf_newton_value;
use super::{mean, mse, BoostMode, BoostModel, BoostParams, CategoryEncoding};
use crate::dataset::{BinMapper, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Ordered target statistic of a categorical column.
///
/// `order[k]` is the row at position `k` of the permutation. The encoding of
/// a row uses only the targets of same-category rows that precede it:
/// `(sum + a * prior) / (count + a)`.
pub fn ordered_target_statistic(codes: &[f64], y: &[f64], order: &[usize], prior: f64, a: f64) -> Result<Vec<f64>> {
    if codes.len() != y.len() || order.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: if codes.len() != y.len() { codes.len() } else { order.len() },
        });
    }
    if !(a > 0.0) {
        return Err(Error::invalid("ts_prior_weight", "must be > 0"));
    }
    let mut acc: HashMap<u64, (f64, f64)> = HashMap::new();
    let mut out = vec![0.0; y.len()];
    for &i in order {
        let e = acc.entry(codes[i].to_bits()).or_insert((0.0, 0.0));
        out[i] = (e.0 + a * prior) / (e.1 + a);
        e.0 += y[i];
        e.1 += 1.0;
    }
    Ok(out)
}

/// Full-data target statistic per code, for inference.
fn full_statistic(codes: &[f64], y: &[f64], prior: f64, a: f64) -> Vec<f64> {
    let k = codes
        .iter()
        .filter(|c| **c >= 0.0 && c.fract() == 0.0)
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0);
    let mut sum = vec![0.0; k];
    let mut cnt = vec![0.0; k];
    for (&c, &t) in codes.iter().zip(y) {
        if c >= 0.0 && c.fract() == 0.0 {
            sum[c as usize] += t;
            cnt[c as usize] += 1.0;
        }
    }
    sum.iter().zip(&cnt).map(|(s, n)| (s + a * prior) / (n + a)).collect()
}

/// Per-row update: the mean of `values` over the row's leaf, shrunk by `lambda`.
pub fn plain_leaf_updates(leaf_of: &[usize], values: &[f64], lambda: f64) -> Vec<f64> {
    let mut sum: HashMap<usize, (f64, f64)> = HashMap::new();
    for (&l, &v) in leaf_of.iter().zip(values) {
        let e = sum.entry(l).or_insert((0.0, 0.0));
        e.0 += v;
        e.1 += 1.0;
    }
    leaf_of
        .iter()
        .map(|l| {
            let (s, c) = sum[l];
            s / (c + lambda)
        })
        .collect()
}

/// Per-row update from the same-leaf rows strictly earlier in `order`. A row
/// with no such predecessor gets 0.
pub fn ordered_leaf_updates(leaf_of: &[usize], values: &[f64], order: &[usize], lambda: f64) -> Vec<f64> {
    let mut acc: HashMap<usize, (f64, f64)> = HashMap::new();
    let mut out = vec![0.0; values.len()];
    for &i in order {
        let e = acc.entry(leaf_of[i]).or_insert((0.0, 0.0));
        out[i] = if e.1 > 0.0 { e.0 / (e.1 + lambda) } else { 0.0 };
        e.0 += values[i];
        e.1 += 1.0;
    }
    out
}

/// Feature matrix as seen under one permutation, with its bins.
struct PermView {
    x: Matrix,
    mapper: BinMapper,
    layout: HistLayout,
    codes: Vec<u16>,
}

fn perm_view(x: Matrix, max_bins: usize) -> Result<PermView> {
    let mapper = BinMapper::fit(&x, max_bins)?;
    let codes = mapper.transform(&x)?;
    let layout = HistLayout::new(&mapper);
    Ok(PermView {
        x,
        mapper,
        layout,
        codes,
    })
}

/// Ordered boosting with `p.n_permutations` seeded random permutations.
pub fn fit_ordered_boost(train: &Dataset, p: &BoostParams) -> Result<BoostModel> {
    p.validate()?;
    let n = train.n_rows();
    let mut r = rng::stream(p.seed, 0x5eed);
    let perms = (0..p.n_permutations)
        .map(|_| {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut r);
            o
        })
        .collect();
    fit_ordered_boost_with_permutations(train, p, perms)
}

/// As [`fit_ordered_boost`] with caller-supplied permutations (`perm[k]` is
/// the row at position `k`).
pub fn fit_ordered_boost_with_permutations(train: &Dataset, p: &BoostParams, perms: Vec<Vec<usize>>) -> Result<BoostModel> {
    p.validate()?;
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if perms.is_empty() {
        return Err(Error::invalid("n_permutations", "at least one permutation required"));
    }
    for perm in &perms {
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::invalid("permutation", "not a bijection on the rows"));
        }
    }
    let y = train.y();
    let prior = mean(y);
    let a = p.ts_prior_weight;
    let cats = train.categorical_features();

    let views: Vec<PermView> = if cats.is_empty() {
        vec![perm_view(train.x().clone(), p.max_bins)?]
    } else {
        perms
            .iter()
            .map(|perm| {
                let mut cols: Vec<Vec<f64>> = (0..train.n_features()).map(|j| train.x().column(j)).collect();
                for &j in &cats {
                    cols[j] = ordered_target_statistic(&cols[j], y, perm, prior, a)?;
                }
                perm_view(Matrix::from_columns(&cols)?, p.max_bins)
            })
            .collect::<Result<_>>()?
    };
    let view_of = |r: usize| if cats.is_empty() { &views[0] } else { &views[r] };

    let cfg = p.grow_config();
    let base = prior;
    let mut f = vec![base; n];
    let mut support = vec![vec![base; n]; perms.len()];
    let mut pick = rng::stream(p.seed, 0x0bde);
    let mut trees = Vec::with_capacity(p.n_estimators);
    let mut loss = Vec::with_capacity(p.n_estimators);
    let h = vec![1.0; n];

    for t in 0..p.n_estimators {
        let r = if perms.len() == 1 { 0 } else { pick.random_range(0..perms.len()) };
        let pv = view_of(r);
        let g: Vec<f64> = match p.mode {
            BoostMode::Plain => f.iter().zip(y).map(|(fi, yi)| fi - yi).collect(),
            BoostMode::Ordered => support[r].iter().zip(y).map(|(m, yi)| m - yi).collect(),
        };
        let rows: Vec<usize> = if p.subsample < 1.0 {
            let k = ((p.subsample * n as f64).ceil() as usize).clamp(1, n);
            let mut s = rng::stream(p.seed, t as u64);
            let mut rows = rand::seq::index::sample(&mut s, n, k).into_vec();
            rows.sort_unstable();
            rows
        } else {
            (0..n).collect()
        };
        let view = BinnedView {
            mapper: &pv.mapper,
            layout: &pv.layout,
            codes: &pv.codes,
            n_rows: n,
        };
        let mut grown = grow(&view, rows, &g, &h, &cfg);

        // final-model leaves: Newton step on the residuals of the model itself
        for (leaf, members) in &grown.leaves {
            let (mut sg, mut sh) = (0.0, 0.0);
            for &i in members {
                sg += f[i] - y[i];
                sh += h[i];
            }
            grown.tree.set_leaf_value(*leaf, leaf_newton_value(sg, sh, p.l2_lambda)?);
        }
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += p.learning_rate * grown.tree.predict_row(pv.x.row(i));
        }

        if p.mode == BoostMode::Ordered {
            for (k, perm) in perms.iter().enumerate() {
                let xk = &view_of(k).x;
                let leaf_of: Vec<usize> = (0..n).map(|i| grown.tree.leaf_id(xk.row(i))).collect();
                let resid: Vec<f64> = support[k].iter().zip(y).map(|(m, yi)| yi - m).collect();
                let delta = ordered_leaf_updates(&leaf_of, &resid, perm, p.l2_lambda);
                for (m, d) in support[k].iter_mut().zip(&delta) {
                    *m += p.learning_rate * d;
                }
            }
        }

        let l = mse(&f, y);
        if !l.is_finite() {
            return Err(Error::Numeric(format!("training loss became {l} at iteration {t}")));
        }
        loss.push(l);
        trees.push(grown.tree);
    }

    let encoders = cats
        .iter()
        .map(|&j| CategoryEncoding {
            feature: j,
            values: full_statistic(&train.x().column(j), y, prior, a),
            prior,
        })
        .collect();
    let mut model = BoostModel::new(base, p.learning_rate, trees, train.n_features());
    model.encoders = encoders;
    model.train_loss = loss;
    Ok(model)
}
