use serde::{Deserialize, Serialize};

use super::{ColumnKind, ColumnSchema, Dataset};
use crate::error::{Error, Result};

/// Target delays (in rows, i.e. days for a daily series) used as features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LagSpec {
    delays: Vec<usize>,
}

impl LagSpec {
    pub fn new(mut delays: Vec<usize>) -> Result<Self> {
        if delays.contains(&0) {
            return Err(Error::invalid("lags", "delays must be >= 1"));
        }
        delays.sort_unstable();
        if delays.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("lags", "duplicate delay"));
        }
        Ok(Self { delays })
    }

    pub fn none() -> Self {
        Self { delays: Vec::new() }
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn max_delay(&self) -> usize {
        self.delays.last().copied().unwrap_or(0)
    }
}

impl Default for LagSpec {
    /// Daily, weekly, monthly and annual structure.
    fn default() -> Self {
        Self {
            delays: vec![1, 2, 3, 7, 14, 28, 364],
        }
    }
}

impl TryFrom<Vec<usize>> for LagSpec {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        LagSpec::new(v)
    }
}

impl From<LagSpec> for Vec<usize> {
    fn from(l: LagSpec) -> Self {
        l.delays
    }
}

pub fn lag_feature_name(target: &str, delay: usize) -> String {
    format!("{target}_lag{delay}")
}

/// Appends `target(t - d)` for every delay and drops the leading rows whose
/// lags would reach before the start of the series.
pub fn build_lagged(d: &Dataset, lags: &LagSpec) -> Result<Dataset> {
    if lags.delays.is_empty() {
        return Ok(d.clone());
    }
    let max = lags.max_delay();
    let n = d.n_rows();
    if max >= n {
        return Err(Error::TooFewRows {
            needed: max + 1,
            have: n,
        });
    }
    let y = d.y();
    let cols: Vec<ColumnSchema> = lags
        .delays
        .iter()
        .map(|&l| ColumnSchema::feature(lag_feature_name(d.target_name(), l), ColumnKind::Numeric))
        .collect();
    let values: Vec<Vec<f64>> = lags
        .delays
        .iter()
        .map(|&l| (max..n).map(|i| y[i - l]).collect())
        .collect();
    d.slice_rows(max, n).append_features(cols, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn series(y: Vec<f64>) -> Dataset {
        let n = y.len();
        let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        Dataset::new(
            vec![ColumnSchema::feature("t", ColumnKind::Numeric)],
            x,
            y,
            None,
            "z",
        )
        .unwrap()
    }

    #[test]
    fn single_lag_shifts_by_one() {
        let d = series(vec![10.0, 20.0, 30.0, 40.0]);
        let l = build_lagged(&d, &LagSpec::new(vec![1]).unwrap()).unwrap();
        assert_eq!(l.n_rows(), 3);
        assert_eq!(l.x().column(1), vec![10.0, 20.0, 30.0]);
        assert_eq!(l.y(), &[20.0, 30.0, 40.0]);
        assert_eq!(l.feature_names()[1], "z_lag1");
    }

    #[test]
    fn two_lags() {
        let d = series(vec![10.0, 20.0, 30.0, 40.0]);
        let l = build_lagged(&d, &LagSpec::new(vec![2, 1]).unwrap()).unwrap();
        assert_eq!(l.n_rows(), 2);
        assert_eq!(l.x().row(0)[1..], [20.0, 10.0]);
        assert_eq!(l.x().row(1)[1..], [30.0, 20.0]);
        assert_eq!(l.y(), &[30.0, 40.0]);
    }

    #[test]
    fn empty_lag_set_is_identity() {
        let d = series(vec![1.0, 2.0]);
        assert_eq!(build_lagged(&d, &LagSpec::none()).unwrap(), d);
    }

    #[test]
    fn lag_longer_than_series_rejected() {
        let d = series(vec![1.0, 2.0, 3.0]);
        assert!(build_lagged(&d, &LagSpec::new(vec![3]).unwrap()).is_err());
        assert!(LagSpec::new(vec![0]).is_err());
    }

    #[test]
    fn lags_never_look_ahead() {
        let y: Vec<f64> = (0..50).map(|i| (i * i) as f64).collect();
        let d = series(y.clone());
        let lags = LagSpec::new(vec![1, 3, 7]).unwrap();
        let l = build_lagged(&d, &lags).unwrap();
        for i in 0..l.n_rows() {
            let t = l.x().get(i, 0) as usize;
            assert_eq!(l.y()[i], y[t]);
            for (k, &lag) in lags.delays().iter().enumerate() {
                // every lag value comes from a strictly earlier position
                assert_eq!(l.x().get(i, 1 + k), y[t - lag]);
            }
        }
    }
}
