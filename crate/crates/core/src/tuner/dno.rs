use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::de::{binomial_crossover, de_mutate, de_mutate_best1};
use super::nelder_mead::{nelder_mead, NmConfig};
use super::space::ParamDef;
use crate::error::{Error, Result};
use crate::exec;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Double difference anchored at the best member.
    #[default]
    BestTwoDiff,
    /// Single difference anchored at the best member.
    BestOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnoConfig {
    pub population: usize,
    pub zeta: f64,
    pub crossover_rate: f64,
    pub max_iter: usize,
    /// Fixed stagnation threshold; `None` uses `1e-6 |best| + 1e-9`.
    pub stagnation: Option<f64>,
    pub local_search: bool,
    pub nm: NmConfig,
    pub mutation: Mutation,
    /// Cap on objective calls, local search included.
    pub max_evals: Option<usize>,
    pub seed: u64,
}

impl Default for DnoConfig {
    fn default() -> Self {
        Self {
            population: 15,
            zeta: 0.5,
            crossover_rate: 0.5,
            max_iter: 100,
            stagnation: None,
            local_search: true,
            nm: NmConfig::default(),
            mutation: Mutation::default(),
            max_evals: None,
            seed: 0,
        }
    }
}

impl DnoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::invalid("population", "must be >= 4"));
        }
        if !(self.zeta > 0.0 && self.zeta <= 2.0) {
            return Err(Error::invalid("zeta", "must be in (0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::invalid("crossover_rate", "must be in [0, 1]"));
        }
        if let Some(l) = self.stagnation {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid("stagnation", "must be > 0"));
            }
        }
        if self.max_evals == Some(0) {
            return Err(Error::invalid("max_evals", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub nm_triggered: bool,
    pub evaluations: usize,
    /// Objective calls this iteration that returned a non-finite value.
    pub non_finite: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnoResult {
    /// Internal coordinates of the best point found.
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Row 0 describes the initial population.
    pub trace: Vec<TraceRow>,
    pub evaluations: Vec<Evaluation>,
    /// `(r1, r2, r3, best)` for every mutation, in order.
    pub donors: Vec<[usize; 4]>,
}

fn finite_or_neg_inf(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        f64::NEG_INFINITY
    }
}

fn argmax(fit: &[f64]) -> usize {
    let mut b = 0;
    for (i, &f) in fit.iter().enumerate() {
        if f > fit[b] {
            b = i;
        }
    }
    b
}

/// Maximizes `objective` over the box described by `defs`, in internal
/// coordinates. Objective values that are not finite count as `-inf`.
pub fn dno_optimize<F>(objective: F, defs: &[ParamDef], cfg: &DnoConfig) -> Result<DnoResult>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    cfg.validate()?;
    if defs.is_empty() {
        return Err(Error::invalid("defs", "at least one parameter is required"));
    }
    for d in defs {
        d.validate()?;
    }
    let bounds: Vec<(f64, f64)> = defs.iter().map(ParamDef::internal_bounds).collect();
    let dim = defs.len();
    let np = cfg.population;
    let budget = cfg.max_evals.unwrap_or(usize::MAX);
    let mut r = rng::stream(cfg.seed, 0xde);
    let mut evaluations: Vec<Evaluation> = Vec::new();
    let mut donors = Vec::new();
    let mut trace = Vec::new();

    let evaluate = |points: &[Vec<f64>], log: &mut Vec<Evaluation>| -> Vec<f64> {
        let f = exec::map_indexed(points.len(), |i| objective(&points[i]));
        log.extend(points.iter().zip(&f).map(|(p, &v)| Evaluation {
            values: p.clone(),
            fitness: v,
        }));
        f
    };

    let n_init = np.min(budget);
    let mut pop: Vec<Vec<f64>> = (0..n_init)
        .map(|_| bounds.iter().map(|&(lo, hi)| r.random_range(lo..=hi)).collect())
        .collect();
    let raw = evaluate(&pop, &mut evaluations);
    let mut fit: Vec<f64> = raw.iter().map(|&f| finite_or_neg_inf(f)).collect();
    let mean = |f: &[f64]| f.iter().sum::<f64>() / f.len() as f64;

    let mut best_i = argmax(&fit);
    let mut best = pop[best_i].clone();
    let mut best_fit = fit[best_i];
    trace.push(TraceRow {
        iteration: 0,
        best_fitness: best_fit,
        mean_fitness: mean(&fit),
        nm_triggered: false,
        evaluations: evaluations.len(),
        non_finite: raw.iter().filter(|f| !f.is_finite()).count(),
    });
    if n_init < np {
        return Ok(DnoResult { best, best_fitness: best_fit, trace, evaluations, donors });
    }

    let mut prev_max = best_fit;
    for it in 1..=cfg.max_iter {
        let left = budget.saturating_sub(evaluations.len());
        if left == 0 {
            break;
        }
        best_i = argmax(&fit);
        let mut trials = Vec::with_capacity(np);
        for i in 0..np.min(left) {
            let mut pick = |taken: &[usize]| loop {
                let k = r.random_range(0..np);
                if !taken.contains(&k) {
                    return k;
                }
            };
            let r1 = pick(&[best_i]);
            let r2 = pick(&[best_i, r1]);
            let r3 = pick(&[best_i, r1, r2]);
            donors.push([r1, r2, r3, best_i]);
            let mutant = match cfg.mutation {
                Mutation::BestTwoDiff => de_mutate(&pop[r1], &pop[r2], &pop[r3], &pop[best_i], cfg.zeta, &bounds)?,
                Mutation::BestOne => de_mutate_best1(&pop[r1], &pop[r2], &pop[best_i], cfg.zeta, &bounds)?,
            };
            let sn = r.random_range(0..dim);
            trials.push(binomial_crossover(&pop[i], &mutant, cfg.crossover_rate, sn, &mut r)?);
        }
        let raw = evaluate(&trials, &mut evaluations);
        let mut non_finite = raw.iter().filter(|f| !f.is_finite()).count();
        // replacement in index order, after every evaluation is in
        for (i, (t, f)) in trials.into_iter().zip(raw).enumerate() {
            let f = finite_or_neg_inf(f);
            if f > fit[i] {
                pop[i] = t;
                fit[i] = f;
            }
        }
        let cur_i = argmax(&fit);
        let delta = fit[cur_i] - prev_max;
        let lambda = cfg.stagnation.unwrap_or(1e-6 * fit[cur_i].abs() + 1e-9);
        let mut triggered = false;
        let left = budget.saturating_sub(evaluations.len());
        if cfg.local_search && !(delta >= lambda) && left > 0 && fit[cur_i].is_finite() {
            triggered = true;
            let nm = nelder_mead(&objective, &pop[cur_i], &bounds, &cfg.nm, Some(left))?;
            non_finite += nm.evaluations.iter().filter(|(_, f)| !f.is_finite()).count();
            evaluations.extend(nm.evaluations.into_iter().map(|(values, fitness)| Evaluation { values, fitness }));
            if nm.fitness > fit[cur_i] {
                pop[cur_i] = nm.values;
                fit[cur_i] = nm.fitness;
            }
        }
        let cur_i = argmax(&fit);
        prev_max = fit[cur_i];
        if fit[cur_i] > best_fit {
            best_fit = fit[cur_i];
            best = pop[cur_i].clone();
        }
        trace.push(TraceRow {
            iteration: it,
            best_fitness: best_fit,
            mean_fitness: mean(&fit),
            nm_triggered: triggered,
            evaluations: evaluations.len(),
            non_finite,
        });
    }
    Ok(DnoResult { best, best_fitness: best_fit, trace, evaluations, donors })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| v * v).sum::<f64>()
    }

    fn box5() -> Vec<ParamDef> {
        (0..5).map(|i| ParamDef::real(&format!("x{i}"), -5.0, 5.0)).collect()
    }

    #[test]
    fn sphere_benchmark_median() {
        let mut best: Vec<f64> = (0..10)
            .map(|s| dno_optimize(sphere, &box5(), &DnoConfig { seed: s, ..Default::default() }).unwrap().best_fitness)
            .collect();
        best.sort_by(f64::total_cmp);
        assert!((best[4] + best[5]) / 2.0 > -1e-3, "{best:?}");
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = DnoConfig { seed: 11, max_iter: 20, ..Default::default() };
        let a = dno_optimize(sphere, &box5(), &cfg).unwrap();
        let b = dno_optimize(sphere, &box5(), &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn non_finite_objective_is_flagged() {
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { -x[0] * x[0] };
        let defs = [ParamDef::real("a", -1.0, 1.0)];
        let r = dno_optimize(f, &defs, &DnoConfig { max_iter: 5, population: 6, ..Default::default() }).unwrap();
        assert!(r.best_fitness.is_finite());
        assert!(r.trace.iter().map(|t| t.non_finite).sum::<usize>() > 0);
    }

    #[test]
    fn evaluation_budget() {
        let cfg = DnoConfig { max_evals: Some(50), ..Default::default() };
        let r = dno_optimize(sphere, &box5(), &cfg).unwrap();
        assert_eq!(r.evaluations.len(), 50);
        let cfg = DnoConfig { max_evals: Some(7), ..Default::default() };
        assert_eq!(dno_optimize(sphere, &box5(), &cfg).unwrap().evaluations.len(), 7);
    }

    #[test]
    fn config_validation() {
        for bad in [
            DnoConfig { population: 3, ..Default::default() },
            DnoConfig { zeta: 0.0, ..Default::default() },
            DnoConfig { zeta: 2.5, ..Default::default() },
            DnoConfig { crossover_rate: 1.5, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn search_invariants(seed in 0u64..10_000, shift in -3.0f64..3.0, best_one in any::<bool>()) {
            let f = move |x: &[f64]| -x.iter().map(|v| (v - shift).powi(2)).sum::<f64>();
            let defs: Vec<ParamDef> = (0..3).map(|i| ParamDef::real(&format!("x{i}"), -5.0, 5.0)).collect();
            let mutation = if best_one { Mutation::BestOne } else { Mutation::BestTwoDiff };
            let cfg = DnoConfig { seed, max_iter: 15, mutation, ..Default::default() };
            let r = dno_optimize(f, &defs, &cfg).unwrap();
            for e in &r.evaluations {
                prop_assert!(e.values.iter().all(|v| (-5.0..=5.0).contains(v)));
            }
            for w in r.trace.windows(2) {
                prop_assert!(w[1].best_fitness >= w[0].best_fitness);
            }
            prop_assert!(r.best_fitness >= r.trace[0].best_fitness);
            for d in &r.donors {
                for a in 0..4 {
                    for b in a + 1..4 {
                        prop_assert_ne!(d[a], d[b]);
                    }
                }
            }

            let no_nm = DnoConfig { local_search: false, ..cfg };
            let r = dno_optimize(f, &defs, &no_nm).unwrap();
            for w in r.trace.windows(2) {
                prop_assert!(w[1].mean_fitness >= w[0].mean_fitness - 1e-12);
            }
        }
    }
}
