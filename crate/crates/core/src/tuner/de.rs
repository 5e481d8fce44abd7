use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

fn same_len(vs: &[&[f64]]) -> Result<usize> {
    let n = vs[0].len();
    if let Some(v) = vs.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    Ok(n)
}

fn clip(mut v: Vec<f64>, bounds: &[(f64, f64)]) -> Vec<f64> {
    for (x, &(lo, hi)) in v.iter_mut().zip(bounds) {
        *x = x.clamp(lo, hi);
    }
    v
}

/// `gbest + zeta (p1 - p2) + zeta (p3 - gbest)`, clipped into `bounds`.
/// An empty `bounds` skips clipping.
pub fn de_mutate(p1: &[f64], p2: &[f64], p3: &[f64], gbest: &[f64], zeta: f64, bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
    let n = same_len(&[p1, p2, p3, gbest])?;
    let v = (0..n)
        .map(|j| gbest[j] + zeta * (p1[j] - p2[j]) + zeta * (p3[j] - gbest[j]))
        .collect();
    Ok(clip(v, bounds))
}

/// Single-difference variant anchored at the best: `gbest + zeta (p1 - p2)`.
pub fn de_mutate_best1(p1: &[f64], p2: &[f64], gbest: &[f64], zeta: f64, bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
    let n = same_len(&[p1, p2, gbest])?;
    let v = (0..n).map(|j| gbest[j] + zeta * (p1[j] - p2[j])).collect();
    Ok(clip(v, bounds))
}

/// Component `j` comes from the mutant when a fresh uniform draw is below
/// `cr`, or when `j == sn`; otherwise from the target.
pub fn binomial_crossover(target: &[f64], mutant: &[f64], cr: f64, sn: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let n = same_len(&[target, mutant])?;
    if sn >= n {
        return Err(Error::invalid("sn", format!("{sn} out of range for dimension {n}")));
    }
    Ok((0..n)
        .map(|j| {
            let u: f64 = rng.random();
            if u < cr || j == sn {
                mutant[j]
            } else {
                target[j]
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn mutation_by_hand() {
        let t = de_mutate(&[2.0, 2.0], &[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], 0.5, &[]).unwrap();
        assert_eq!(t, vec![2.0, 2.0]);
        let g = [0.3, -1.2];
        assert_eq!(de_mutate(&[5.0, 1.0], &[2.0, 7.0], &[1.0, 1.0], &g, 0.0, &[]).unwrap(), g.to_vec());
        assert_eq!(de_mutate(&g, &g, &g, &g, 0.9, &[]).unwrap(), g.to_vec());
        assert!(de_mutate(&[1.0], &[1.0, 2.0], &[1.0], &[1.0], 0.5, &[]).is_err());
    }

    #[test]
    fn mutation_is_clipped() {
        let t = de_mutate(&[10.0], &[0.0], &[0.0], &[0.0], 1.0, &[(-1.0, 1.0)]).unwrap();
        assert_eq!(t, vec![1.0]);
        assert_eq!(de_mutate_best1(&[3.0], &[1.0], &[0.0], 0.5, &[]).unwrap(), vec![1.0]);
    }

    #[test]
    fn crossover_limits() {
        let target = [0.0; 6];
        let mutant = [1.0; 6];
        let mut r = rng::stream(1, 0);
        assert_eq!(binomial_crossover(&target, &mutant, 1.0, 2, &mut r).unwrap(), mutant.to_vec());
        let t = binomial_crossover(&target, &mutant, 0.0, 4, &mut r).unwrap();
        assert_eq!(t, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(binomial_crossover(&target, &mutant, 0.5, 6, &mut r).is_err());
    }

    #[test]
    fn crossover_deterministic_per_seed() {
        let target = [0.0; 8];
        let mutant = [1.0; 8];
        let a = binomial_crossover(&target, &mutant, 0.5, 0, &mut rng::stream(9, 3)).unwrap();
        let b = binomial_crossover(&target, &mutant, 0.5, 0, &mut rng::stream(9, 3)).unwrap();
        assert_eq!(a, b);
    }
}
