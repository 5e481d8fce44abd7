//! The ten regression metrics, with MEDAE and MDA in their as-printed forms.
//!
//! Notation: `actual` is the observed series, `pred` the estimate. Metrics
//! that are undefined for an input (zero variance, a zero actual for MAPE,
//! a value <= -1 for MSLE) are reported as `None`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// MDA from consecutive differences of each series instead of the
    /// as-printed mixed form.
    pub standard_mda: bool,
    /// Median absolute error instead of the as-printed mean deviation of the
    /// actual series.
    pub standard_medae: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_samples: usize,
    pub r: Option<f64>,
    pub evs: Option<f64>,
    pub mae: f64,
    pub msle: Option<f64>,
    pub rmse: f64,
    pub smape: f64,
    pub medae: f64,
    pub mape: Option<f64>,
    pub mda: f64,
    pub rse: Option<f64>,
}

impl MetricReport {
    pub const NAMES: [&'static str; 10] = ["r", "evs", "mae", "msle", "rmse", "smape", "medae", "mape", "mda", "rse"];

    /// Metric values in [`Self::NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.r,
            self.evs,
            Some(self.mae),
            self.msle,
            Some(self.rmse),
            Some(self.smape),
            Some(self.medae),
            self.mape,
            Some(self.mda),
            self.rse,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .and_then(|i| self.values()[i])
    }
}

fn check(actual: &[f64], pred: &[f64]) -> Result<()> {
    if actual.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: pred.len(),
        });
    }
    if actual.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            have: actual.len(),
        });
    }
    if let Some(v) = actual.iter().chain(pred).find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite value {v} in metric input")));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Pearson correlation with population moments.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a constant series".into()));
    }
    let r = (sxy / n) / ((sxx / n).sqrt() * (syy / n).sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

/// Mean absolute error.
pub fn mae(actual: &[f64], pred: &[f64]) -> Result<f64> {
    check(actual, pred)?;
    Ok(actual.iter().zip(pred).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64)
}

pub fn compute_all(actual: &[f64], pred: &[f64]) -> Result<MetricReport> {
    compute_with(actual, pred, MetricOptions::default())
}

pub fn compute_with(actual: &[f64], pred: &[f64], opts: MetricOptions) -> Result<MetricReport> {
    check(actual, pred)?;
    let n = actual.len() as f64;
    let mu = mean(actual);

    let r = match pearson_r(pred, actual) {
        Ok(r) => Some(r),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    let resid: Vec<f64> = actual.iter().zip(pred).map(|(a, p)| a - p).collect();
    let var_a = pop_var(actual);
    let evs = (var_a > 0.0).then(|| 1.0 - pop_var(&resid) / var_a);
    let mae = resid.iter().map(|e| e.abs()).sum::<f64>() / n;
    let msle = actual.iter().chain(pred).all(|&v| v > -1.0).then(|| {
        actual
            .iter()
            .zip(pred)
            .map(|(a, p)| (a.ln_1p() - p.ln_1p()).powi(2))
            .sum::<f64>()
            / n
    });
    let rmse = (resid.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let smape = actual
        .iter()
        .zip(pred)
        .map(|(a, p)| {
            let d = 0.5 * (a.abs() + p.abs());
            if d == 0.0 {
                0.0
            } else {
                (a - p).abs() / d
            }
        })
        .sum::<f64>()
        / n
        * 100.0;
    let medae = if opts.standard_medae {
        median(resid.iter().map(|e| e.abs()).collect())
    } else {
        actual.iter().map(|a| (a - mu).abs()).sum::<f64>() / n
    };
    let mape = actual.iter().all(|&a| a != 0.0).then(|| {
        actual
            .iter()
            .zip(pred)
            .map(|(a, p)| ((a - p) / a).abs())
            .sum::<f64>()
            / n
            * 100.0
    });
    let hits = (1..actual.len())
        .filter(|&k| {
            let lhs = if opts.standard_mda {
                actual[k] - actual[k - 1]
            } else {
                actual[k] - pred[k - 1]
            };
            sign(lhs) == sign(pred[k] - pred[k - 1])
        })
        .count();
    let mda = hits as f64 / (n - 1.0);
    let ss_tot: f64 = actual.iter().map(|a| (mu - a) * (mu - a)).sum();
    let rse = (ss_tot > 0.0).then(|| resid.iter().map(|e| e * e).sum::<f64>() / ss_tot);

    Ok(MetricReport {
        n_samples: actual.len(),
        r,
        evs,
        mae,
        msle,
        rmse,
        smape,
        medae,
        mape,
        mda,
        rse,
    })
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Mean, population standard deviation, min and max of repeated reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
    pub min: Vec<Option<f64>>,
    pub max: Vec<Option<f64>>,
}

pub fn summarize(reports: &[MetricReport]) -> MetricSummary {
    let mut s = MetricSummary {
        mean: Vec::new(),
        std: Vec::new(),
        min: Vec::new(),
        max: Vec::new(),
    };
    for i in 0..MetricReport::NAMES.len() {
        let vals: Option<Vec<f64>> = reports.iter().map(|r| r.values()[i]).collect();
        match vals.filter(|v| !v.is_empty()) {
            Some(v) => {
                s.mean.push(Some(mean(&v)));
                s.std.push(Some(pop_var(&v).sqrt()));
                s.min.push(v.iter().copied().reduce(f64::min));
                s.max.push(v.iter().copied().reduce(f64::max));
            }
            None => {
                s.mean.push(None);
                s.std.push(None);
                s.min.push(None);
                s.max.push(None);
            }
        }
    }
    s
}
