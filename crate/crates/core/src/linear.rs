//! Least squares and ridge regression with an unpenalized intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.weights.len())?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut s = self.intercept;
        for (w, v) in self.weights.iter().zip(row) {
            s += w * v;
        }
        s
    }
}

/// Solves `min ||y - Xw - c||^2 + l2 ||w||^2` through the centered normal
/// equations. At `l2 = 0` a rank-deficient design is an error.
pub fn fit_linear(x: &Matrix, y: &[f64], l2: f64) -> Result<LinearModel> {
    if !(l2.is_finite() && l2 >= 0.0) {
        return Err(Error::invalid("l2", "must be finite and >= 0"));
    }
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let p = x.n_cols();
    let x_mean: Vec<f64> = (0..p)
        .map(|j| x.rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearModel {
            weights: Vec::new(),
            intercept: y_mean,
        });
    }
    let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut a = xc.transpose() * &xc;
    for j in 0..p {
        a[(j, j)] += l2;
    }
    let b = xc.transpose() * yc;

    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-12 * smax.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular(format!(
            "normal equations are rank deficient (smallest singular value {smin:e})"
        )));
    }
    let w = match a.clone().cholesky() {
        Some(c) => c.solve(&b),
        None => a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("normal equations could not be solved".into()))?,
    };
    let weights: Vec<f64> = w.iter().copied().collect();
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite regression weights".into()));
    }
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_recovery() {
        let x = Matrix::from_rows(&[[1.0, 0.3], [2.0, -1.0], [3.0, 0.7], [4.0, 2.0]]).unwrap();
        let y: Vec<f64> = x.rows().map(|r| 2.0 * r[0]).collect();
        let m = fit_linear(&x, &y, 0.0).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-12);
        assert!(m.weights[1].abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn heavy_shrinkage() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [5.0]]).unwrap();
        let y = [2.0, 1.0, 7.0, 4.0];
        let m = fit_linear(&x, &y, 1e12).unwrap();
        assert!(m.weights[0].abs() < 1e-9);
        assert!((m.intercept - 3.5).abs() < 1e-8);
    }

    #[test]
    fn identity_design_by_hand() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let y = [3.0, 5.0];
        // centered columns are collinear, so the unregularized system is singular
        assert!(matches!(fit_linear(&x, &y, 0.0), Err(Error::Singular(_))));
        // l2 = 1: [[1.5, -0.5], [-0.5, 1.5]] w = [-1, 1] -> w = (-0.5, 0.5), c = 4
        let m = fit_linear(&x, &y, 1.0).unwrap();
        assert!((m.weights[0] + 0.5).abs() < 1e-12);
        assert!((m.weights[1] - 0.5).abs() < 1e-12);
        assert!((m.intercept - 4.0).abs() < 1e-12);
    }

    #[test]
    fn projection_and_average() {
        let m = LinearModel {
            weights: vec![0.5, 0.5],
            intercept: 1.0,
        };
        assert_eq!(m.predict_row(&[2.0, 4.0]), 4.0);
    }
}
