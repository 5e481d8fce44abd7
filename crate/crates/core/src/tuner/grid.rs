use super::space::ParamDef;
use crate::error::{Error, Result};
use crate::exec;

/// Fitness over a two-parameter grid: `fitness[i2][i1]` is the value at
/// `(values1[i1], values2[i2])`, so each column holds one value of the
/// first parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSurface {
    pub name1: String,
    pub name2: String,
    pub values1: Vec<f64>,
    pub values2: Vec<f64>,
    pub fitness: Vec<Vec<f64>>,
}

impl GridSurface {
    /// Row and column of the largest finite fitness.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i2, row) in self.fitness.iter().enumerate() {
            for (i1, &f) in row.iter().enumerate() {
                if f.is_finite() && best.is_none_or(|b| f > b.2) {
                    best = Some((i2, i1, f));
                }
            }
        }
        best.map(|(a, b, _)| (a, b))
    }

    /// Long format `(param1, param2, fitness)` rows.
    pub fn long_rows(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (i2, row) in self.fitness.iter().enumerate() {
            for (i1, &f) in row.iter().enumerate() {
                out.push((self.values1[i1], self.values2[i2], f));
            }
        }
        out
    }
}

fn axis(d: &ParamDef, res: usize) -> Vec<f64> {
    let (lo, hi) = d.internal_bounds();
    (0..res)
        .map(|k| d.to_natural(lo + (hi - lo) * k as f64 / (res - 1) as f64))
        .collect()
}

/// Evaluates `objective(v1, v2)` on an evenly spaced grid (in internal
/// coordinates, endpoints included). Values passed are natural values.
pub fn grid_search<F>(objective: F, p1: &ParamDef, p2: &ParamDef, res1: usize, res2: usize) -> Result<GridSurface>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    if res1 < 2 || res2 < 2 {
        return Err(Error::invalid("resolution", "must be >= 2 per axis"));
    }
    p1.validate()?;
    p2.validate()?;
    let values1 = axis(p1, res1);
    let values2 = axis(p2, res2);
    let flat = exec::map_indexed(res1 * res2, |k| objective(values1[k % res1], values2[k / res1]));
    Ok(GridSurface {
        name1: p1.name.clone(),
        name2: p2.name.clone(),
        fitness: flat.chunks(res1).map(|c| c.to_vec()).collect(),
        values1,
        values2,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    #[test]
    fn two_by_two_counts() {
        let calls = AtomicUsize::new(0);
        let s = grid_search(
            |_, _| {
                calls.fetch_add(1, Ordering::Relaxed);
                0.0
            },
            &ParamDef::real("a", 0.0, 1.0),
            &ParamDef::real("b", 0.0, 1.0),
            2,
            2,
        )
        .unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 4);
        assert_eq!(s.long_rows().len(), 4);
    }

    #[test]
    fn separable_columns_constant() {
        let s = grid_search(|a, _| a * a, &ParamDef::real("a", -1.0, 2.0), &ParamDef::int("b", 1.0, 9.0), 4, 5).unwrap();
        for i1 in 0..4 {
            let col: Vec<f64> = s.fitness.iter().map(|r| r[i1]).collect();
            assert!(col.iter().all(|&v| v == col[0]));
        }
        assert_eq!(s.values2, vec![1.0, 3.0, 5.0, 7.0, 9.0]);
    }

    #[test]
    fn coarse_argmax_matches_fine_grid() {
        let f = |a: f64, b: f64| -((a - 0.3).powi(2) + 2.0 * (b + 0.6).powi(2));
        let (p1, p2) = (ParamDef::real("a", -1.0, 1.0), ParamDef::real("b", -1.0, 1.0));
        let coarse = grid_search(f, &p1, &p2, 11, 11).unwrap();
        let fine = grid_search(f, &p1, &p2, 1001, 1001).unwrap();
        let (c2, c1) = coarse.argmax().unwrap();
        let (f2, f1) = fine.argmax().unwrap();
        // the fine optimum falls in the coarse cell nearest the coarse argmax
        assert!((fine.values1[f1] - coarse.values1[c1]).abs() <= 0.1 + 1e-12);
        assert!((fine.values2[f2] - coarse.values2[c2]).abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn resolution_checked() {
        let p = ParamDef::real("a", 0.0, 1.0);
        assert!(grid_search(|_, _| 0.0, &p, &p, 1, 3).is_err());
    }
}
