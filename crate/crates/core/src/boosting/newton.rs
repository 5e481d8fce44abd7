//! Second-order quantities for squared-error boosting.

use crate::error::{Error, Result};

/// Leaf weight minimizing `sum_g * w + (sum_h + lambda) * w^2 / 2`.
pub fn leaf_newton_value(sum_g: f64, sum_h: f64, lambda: f64) -> Result<f64> {
    let d = sum_h + lambda;
    if !(d > 0.0) {
        return Err(Error::Numeric(format!(
            "non-positive Newton denominator {d} (sum_h {sum_h}, lambda {lambda})"
        )));
    }
    Ok(-sum_g / d)
}

/// Loss reduction of splitting a node into (L, R), minus the split penalty.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> Result<f64> {
    for d in [hl + lambda, hr + lambda, hl + hr + lambda] {
        if !(d > 0.0) {
            return Err(Error::Numeric(format!("non-positive split denominator {d}")));
        }
    }
    Ok(gain_unchecked(gl, hl, gr, hr, lambda, gamma))
}

#[inline]
pub(crate) fn gain_unchecked(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

/// Gradients and hessians of the halved squared error at `pred`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl GradHess {
    pub fn squared_error(pred: &[f64], y: &[f64]) -> Self {
        Self {
            g: pred.iter().zip(y).map(|(p, t)| p - t).collect(),
            h: vec![1.0; y.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn newton_examples() {
        assert_eq!(leaf_newton_value(-4.0, 2.0, 0.0).unwrap(), 2.0);
        assert_eq!(leaf_newton_value(0.0, 5.0, 1.0).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for lambda in [0.0, 1.0, 10.0, 1e3, 1e6] {
            let w = leaf_newton_value(-4.0, 2.0, lambda).unwrap();
            assert!(w > 0.0 && w < prev);
            prev = w;
        }
        assert!(prev < 1e-5);
        assert!(leaf_newton_value(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn gain_examples() {
        // 0.5 * (4/1 + 4/1 - 0/2) = 4
        assert_eq!(split_gain(-2.0, 1.0, 2.0, 1.0, 0.0, 0.0).unwrap(), 4.0);
        assert_eq!(split_gain(0.0, 1.0, 0.0, 1.0, 0.0, 0.7).unwrap(), -0.7);
        assert_eq!(
            split_gain(-3.0, 2.0, 1.0, 5.0, 0.5, 0.1).unwrap(),
            split_gain(1.0, 5.0, -3.0, 2.0, 0.5, 0.1).unwrap()
        );
        assert!(split_gain(1.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn newton_value_is_local_argmin(g in -100.0f64..100.0, h in 0.01f64..50.0, lambda in 0.0f64..10.0) {
            let w = leaf_newton_value(g, h, lambda).unwrap();
            let q = |w: f64| g * w + 0.5 * (h + lambda) * w * w;
            prop_assert!(q(w + 1e-3) >= q(w));
            prop_assert!(q(w - 1e-3) >= q(w));
        }
    }
}
