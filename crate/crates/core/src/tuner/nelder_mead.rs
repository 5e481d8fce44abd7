use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmConfig {
    pub max_iter: usize,
    /// Initial simplex edge as a fraction of each axis range.
    pub initial_fraction: f64,
    pub tolerance: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            initial_fraction: 0.05,
            tolerance: 1e-8,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub values: Vec<f64>,
    pub fitness: f64,
    pub iterations: usize,
    /// Every point evaluated, in order.
    pub evaluations: Vec<(Vec<f64>, f64)>,
}

/// Maximizes `objective` inside the box `bounds` by the simplex method,
/// starting from `start`. Points are clipped into the box. `max_evals`
/// caps objective calls.
pub fn nelder_mead<F>(
    objective: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    cfg: &NmConfig,
    max_evals: Option<usize>,
) -> Result<NmResult>
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    if bounds.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bounds.len() });
    }
    let budget = max_evals.unwrap_or(usize::MAX);
    let mut evals: Vec<(Vec<f64>, f64)> = Vec::new();
    let clip = |x: Vec<f64>| -> Vec<f64> {
        x.into_iter()
            .zip(bounds)
            .map(|(v, &(lo, hi))| v.clamp(lo, hi))
            .collect()
    };
    // minimized internally
    let eval = |x: &[f64], evals: &mut Vec<(Vec<f64>, f64)>| -> f64 {
        let f = objective(x);
        evals.push((x.to_vec(), f));
        if f.is_finite() {
            -f
        } else {
            f64::INFINITY
        }
    };

    let x0 = clip(start.to_vec());
    let f0 = eval(&x0, &mut evals);
    if !f0.is_finite() {
        return Err(Error::Numeric("objective is not finite at the Nelder-Mead start".into()));
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), f0)];
    for j in 0..n {
        if evals.len() >= budget {
            break;
        }
        let (lo, hi) = bounds[j];
        let step = cfg.initial_fraction * (hi - lo);
        let mut x = x0.clone();
        x[j] = if x[j] + step <= hi { x[j] + step } else { x[j] - step };
        let f = eval(&x, &mut evals);
        simplex.push((x, f));
    }
    let mut iterations = 0;
    if simplex.len() == n + 1 {
        while iterations < cfg.max_iter && evals.len() < budget {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            if diameter < cfg.tolerance {
                break;
            }
            iterations += 1;
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let (worst, f_worst) = simplex[n].clone();
            let toward = |t: f64, from: &[f64]| -> Vec<f64> {
                clip(centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect())
            };
            let xr = toward(-cfg.reflection, &worst);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                if evals.len() >= budget {
                    simplex[n] = (xr, fr);
                    break;
                }
                let xe = toward(-cfg.reflection * cfg.expansion, &worst);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            if evals.len() >= budget {
                break;
            }
            let (xc, fc, accept) = if fr < f_worst {
                let xc = toward(-cfg.reflection * cfg.contraction, &worst);
                let fc = eval(&xc, &mut evals);
                (xc, fc, fc <= fr)
            } else {
                let xc = toward(cfg.contraction, &worst);
                let fc = eval(&xc, &mut evals);
                (xc, fc, fc < f_worst)
            };
            if accept {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for k in 1..=n {
                if evals.len() >= budget {
                    break;
                }
                let x: Vec<f64> = best
                    .iter()
                    .zip(&simplex[k].0)
                    .map(|(b, v)| b + cfg.shrink * (v - b))
                    .collect();
                let f = eval(&x, &mut evals);
                simplex[k] = (x, f);
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (values, f) = simplex.swap_remove(0);
    Ok(NmResult {
        values,
        fitness: -f,
        iterations,
        evaluations: evals,
    })
}
