//! Recursive feature elimination and feature-group ablation.

mod ablation;
mod rfe;

pub use ablation::{ablate_groups, groups_by_name, impact_percent, AblationReport, AblationRow, FeatureGroup};
pub use rfe::{feature_importance, rfe, RfeResult, RfeStep};
