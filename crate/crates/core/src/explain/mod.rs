//! Shapley attributions with an interventional value function: features
//! outside a coalition take their values from each background row in turn
//! and the model output is averaged.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::learner::Regressor;
use crate::matrix::Matrix;
use crate::rng;

/// Largest feature count handled by subset enumeration.
pub const EXACT_MAX_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    rows: Matrix,
}

impl Background {
    pub fn new(rows: Matrix) -> Result<Self> {
        if rows.n_rows() == 0 {
            return Err(Error::invalid("background", "needs at least one row"));
        }
        Ok(Self { rows })
    }

    /// `size` distinct rows of `x` chosen by `seed`, kept in row order; all
    /// rows when `x` is no larger.
    pub fn sample(x: &Matrix, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("background", "size must be >= 1"));
        }
        let mut idx: Vec<usize> = (0..x.n_rows()).collect();
        if idx.len() > size {
            idx.shuffle(&mut rng::stream(seed, 0xb6));
            idx.truncate(size);
            idx.sort_unstable();
        }
        Self::new(x.select_rows(&idx))
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.n_rows() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapReport {
    pub attributions: Vec<f64>,
    /// Mean model output over the background.
    pub base_value: f64,
    pub prediction: f64,
    pub feature_values: Vec<f64>,
}

impl ShapReport {
    /// `(feature, value, attribution)` ordered by decreasing |attribution|.
    pub fn waterfall(&self) -> Vec<(usize, f64, f64)> {
        let mut w: Vec<(usize, f64, f64)> = (0..self.attributions.len())
            .map(|j| (j, self.feature_values[j], self.attributions[j]))
            .collect();
        w.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then(a.0.cmp(&b.0)));
        w
    }
}

/// Mean model output for coalitions `0..n`, using instance values for the
/// features where `member(c, j)` holds and background values elsewhere.
/// Coalitions are evaluated in chunks to bound memory.
fn coalition_values<M, F>(model: &M, instance: &[f64], bg: &Background, n: usize, member: F) -> Result<Vec<f64>>
where
    M: Regressor + ?Sized,
    F: Fn(usize, usize) -> bool,
{
    let nf = instance.len();
    let b = bg.len();
    let chunk = (1 << 16) / b.max(1) + 1;
    let mut out = Vec::with_capacity(n);
    for start in (0..n).step_by(chunk) {
        let end = (start + chunk).min(n);
        let mut data = Vec::with_capacity((end - start) * b * nf);
        for c in start..end {
            let inside: Vec<bool> = (0..nf).map(|j| member(c, j)).collect();
            for row in bg.rows().rows() {
                data.extend((0..nf).map(|j| if inside[j] { instance[j] } else { row[j] }));
            }
        }
        let pred = model.predict(&Matrix::new((end - start) * b, nf, data)?)?;
        out.extend(pred.chunks(b).map(|c| c.iter().sum::<f64>() / b as f64));
    }
    if let Some(v) = out.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("model output {v} while explaining")));
    }
    Ok(out)
}

fn check_instance<M: Regressor + ?Sized>(model: &M, instance: &[f64], bg: &Background) -> Result<()> {
    let nf = model.n_features();
    if instance.len() != nf {
        return Err(Error::DimensionMismatch { expected: nf, got: instance.len() });
    }
    if bg.rows().n_cols() != nf {
        return Err(Error::DimensionMismatch { expected: nf, got: bg.rows().n_cols() });
    }
    Ok(())
}

fn predict_one<M: Regressor + ?Sized>(model: &M, instance: &[f64]) -> Result<f64> {
    Ok(model.predict(&Matrix::new(1, instance.len(), instance.to_vec())?)?[0])
}

/// Exact Shapley values by enumerating every coalition.
pub fn shap_exact<M: Regressor + ?Sized>(model: &M, instance: &[f64], bg: &Background) -> Result<ShapReport> {
    check_instance(model, instance, bg)?;
    let nf = instance.len();
    if nf > EXACT_MAX_FEATURES {
        return Err(Error::invalid(
            "mode",
            format!("{nf} features exceed the exact limit of {EXACT_MAX_FEATURES}; use sampled attributions"),
        ));
    }
    let v = coalition_values(model, instance, bg, 1 << nf, |m, j| m >> j & 1 == 1)?;
    // weight for a coalition of size s: s! (n - s - 1)! / n!
    let fact: Vec<f64> = (0..=nf).scan(1.0, |f, k| {
        if k > 0 {
            *f *= k as f64;
        }
        Some(*f)
    }).collect();
    let weight: Vec<f64> = (0..nf).map(|s| fact[s] * fact[nf - s - 1] / fact[nf]).collect();
    let mut phi = vec![0.0; nf];
    for s in 0..1usize << nf {
        let size = s.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if s >> i & 1 == 0 {
                *p += weight[size] * (v[s | 1 << i] - v[s]);
            }
        }
    }
    Ok(ShapReport {
        attributions: phi,
        base_value: v[0],
        prediction: predict_one(model, instance)?,
        feature_values: instance.to_vec(),
    })
}

/// Permutation-sampling estimate: each random feature ordering contributes
/// one marginal gain per feature along its prefix chain.
pub fn shap_sampled<M: Regressor + ?Sized>(
    model: &M,
    instance: &[f64],
    bg: &Background,
    n_samples: usize,
    seed: u64,
) -> Result<ShapReport> {
    check_instance(model, instance, bg)?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be >= 1"));
    }
    let nf = instance.len();
    let ends = coalition_values(model, instance, bg, 2, |c, _| c == 1)?;
    let (v_empty, v_full) = (ends[0], ends[1]);
    let mut r = rng::stream(seed, 0x5a);
    let mut phi = vec![0.0; nf];
    let mut order: Vec<usize> = (0..nf).collect();
    let per_batch = 256;
    let chain_len = nf.saturating_sub(1);
    let mut done = 0;
    while done < n_samples {
        let take = per_batch.min(n_samples - done);
        let mut perms = Vec::with_capacity(take);
        // position[p][f]: where feature f sits in permutation p
        let mut position = Vec::with_capacity(take);
        for _ in 0..take {
            order.shuffle(&mut r);
            let mut pos = vec![0; nf];
            for (k, &f) in order.iter().enumerate() {
                pos[f] = k;
            }
            perms.push(order.clone());
            position.push(pos);
        }
        // coalition p * chain_len + k holds the first k + 1 features of p
        let v = coalition_values(model, instance, bg, take * chain_len, |c, j| {
            position[c / chain_len][j] <= c % chain_len
        })?;
        for (p, perm) in perms.iter().enumerate() {
            let chain = &v[p * chain_len..(p + 1) * chain_len];
            let mut prev = v_empty;
            for (k, &f) in perm.iter().enumerate() {
                let cur = if k + 1 == nf { v_full } else { chain[k] };
                phi[f] += cur - prev;
                prev = cur;
            }
        }
        done += take;
    }
    phi.iter_mut().for_each(|p| *p /= n_samples as f64);
    Ok(ShapReport {
        attributions: phi,
        base_value: v_empty,
        prediction: predict_one(model, instance)?,
        feature_values: instance.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapMode {
    Exact,
    Sampled { n_samples: usize },
    /// Exact up to the feature limit, sampled beyond it.
    Auto { n_samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapSummary {
    /// `(feature, mean |attribution|)`, largest first.
    pub mean_abs: Vec<(usize, f64)>,
    pub reports: Vec<ShapReport>,
}

impl ShapSummary {
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.reports.iter().map(|r| r.attributions.clone()).collect()
    }
}

pub fn explain_row<M: Regressor + ?Sized>(model: &M, instance: &[f64], bg: &Background, mode: ShapMode, seed: u64) -> Result<ShapReport> {
    match mode {
        ShapMode::Exact => shap_exact(model, instance, bg),
        ShapMode::Sampled { n_samples } => shap_sampled(model, instance, bg, n_samples, seed),
        ShapMode::Auto { n_samples } => {
            if instance.len() <= EXACT_MAX_FEATURES {
                shap_exact(model, instance, bg)
            } else {
                shap_sampled(model, instance, bg, n_samples, seed)
            }
        }
    }
}

/// Attributions for every row of `x` and the per-feature mean |attribution|.
pub fn shap_summary<M: Regressor + ?Sized>(model: &M, x: &Matrix, bg: &Background, mode: ShapMode, seed: u64) -> Result<ShapSummary> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    let reports = exec::try_map_indexed(x.n_rows(), |i| {
        explain_row(model, x.row(i), bg, mode, rng::derive_seed(seed, i as u64))
    })?;
    let nf = x.n_cols();
    let n = reports.len() as f64;
    let mut mean_abs: Vec<(usize, f64)> = (0..nf)
        .map(|j| (j, reports.iter().map(|r| r.attributions[j].abs()).sum::<f64>() / n))
        .collect();
    mean_abs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ShapSummary { mean_abs, reports })
}
