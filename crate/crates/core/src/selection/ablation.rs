use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::learner::{fit_learner, LearnerSpec, Regressor};
use crate::metrics::pearson_r;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub features: Vec<usize>,
}

/// Resolves named groups against `d`'s feature names.
pub fn groups_by_name(d: &Dataset, groups: &[(String, Vec<String>)]) -> Result<Vec<FeatureGroup>> {
    groups
        .iter()
        .map(|(name, cols)| {
            let features = cols
                .iter()
                .map(|c| d.feature_index(c).ok_or_else(|| Error::UnknownColumn(c.clone())))
                .collect::<Result<Vec<_>>>()?;
            Ok(FeatureGroup { name: name.clone(), features })
        })
        .collect()
}

/// Relative loss of accuracy, in percent of the ablated accuracy.
pub fn impact_percent(r_full: f64, r_ablated: f64) -> f64 {
    (r_full - r_ablated) / r_ablated * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub group: String,
    pub excluded: Vec<String>,
    pub r_ablated: f64,
    pub impact_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub r_full: f64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Index of the row with the largest impact. Ranked by the lowest
    /// ablated accuracy: the same order as the impact percentage while every
    /// R_ablated is positive, and still meaningful once one drops to zero or
    /// below, where the percentage changes sign.
    pub fn largest_impact(&self) -> Option<usize> {
        (0..self.rows.len()).min_by(|&a, &b| self.rows[a].r_ablated.total_cmp(&self.rows[b].r_ablated))
    }
}

fn test_r(spec: &LearnerSpec, train: &Dataset, test: &Dataset) -> Result<f64> {
    let m = fit_learner(spec, train)?;
    pearson_r(test.y(), &m.predict(test.x())?)
}

/// Test R with every feature, then with each group removed in turn.
pub fn ablate_groups(train: &Dataset, test: &Dataset, groups: &[FeatureGroup], spec: &LearnerSpec) -> Result<AblationReport> {
    let nf = train.n_features();
    if test.n_features() != nf {
        return Err(Error::DimensionMismatch { expected: nf, got: test.n_features() });
    }
    let mut keeps = Vec::with_capacity(groups.len());
    for g in groups {
        if let Some(&j) = g.features.iter().find(|&&j| j >= nf) {
            return Err(Error::invalid(&g.name, format!("feature index {j} out of range")));
        }
        let keep: Vec<usize> = (0..nf).filter(|j| !g.features.contains(j)).collect();
        if keep.is_empty() {
            return Err(Error::invalid(&g.name, "group removes every feature"));
        }
        keeps.push(keep);
    }
    let r_full = test_r(spec, train, test)?;
    let names = train.feature_names();
    let r_ablated = exec::try_map_indexed(groups.len(), |i| {
        if groups[i].features.is_empty() {
            return Ok(r_full);
        }
        test_r(spec, &train.select_features(&keeps[i])?, &test.select_features(&keeps[i])?)
    })?;
    let rows = groups
        .iter()
        .zip(r_ablated)
        .map(|(g, ra)| AblationRow {
            group: g.name.clone(),
            excluded: g.features.iter().map(|&j| names[j].clone()).collect(),
            r_ablated: ra,
            impact_percent: if ra == r_full { 0.0 } else { impact_percent(r_full, ra) },
        })
        .collect();
    Ok(AblationReport { r_full, rows })
}
