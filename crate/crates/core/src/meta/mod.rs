//! Two-level stacking: out-of-fold sub-learner predictions feed a master.

use serde::{Deserialize, Serialize};

use crate::boosting::BoostParams;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::learner::{fit_learner, LearnerSpec, Model, Regressor};
use crate::linear::{fit_linear, LinearModel};
use crate::matrix::Matrix;
use crate::mlp::{fit_mlp, Mlp, MlpArch, MlpTrainConfig};
use crate::rng::derive_seed;
use crate::trees::ForestParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OofMode {
    ContiguousBlocks,
    ForwardChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OofScheme {
    pub n_folds: usize,
    pub mode: OofMode,
}

impl Default for OofScheme {
    fn default() -> Self {
        Self {
            n_folds: 5,
            mode: OofMode::ContiguousBlocks,
        }
    }
}

impl OofScheme {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::invalid("n_folds", "must be >= 2"));
        }
        Ok(())
    }

    /// Half-open row ranges of the chronological blocks.
    pub fn blocks(&self, n_rows: usize) -> Result<Vec<(usize, usize)>> {
        self.validate()?;
        if n_rows < self.n_folds {
            return Err(Error::TooFewRows {
                needed: self.n_folds,
                have: n_rows,
            });
        }
        let k = self.n_folds;
        Ok((0..k).map(|b| (b * n_rows / k, (b + 1) * n_rows / k)).collect())
    }
}

/// Out-of-fold predictions of one learner. `fit` receives the fold index
/// and the rows it may train on.
pub fn oof_predictions_with<F, M>(train: &Dataset, scheme: &OofScheme, fit: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &Dataset) -> Result<M> + Sync + Send,
    M: Regressor + Send,
{
    let n = train.n_rows();
    let blocks = scheme.blocks(n)?;
    let global_mean = train.y().iter().sum::<f64>() / n as f64;
    let parts = exec::try_map_indexed(blocks.len(), |b| {
        let (lo, hi) = blocks[b];
        let held_out = train.x().slice_rows(lo, hi);
        let rows: Vec<usize> = match scheme.mode {
            OofMode::ContiguousBlocks => (0..lo).chain(hi..n).collect(),
            OofMode::ForwardChain => (0..lo).collect(),
        };
        if rows.is_empty() {
            return Ok(vec![global_mean; hi - lo]);
        }
        let model = fit(b, &train.select_rows(&rows))?;
        model.predict(&held_out)
    })?;
    Ok(parts.concat())
}

pub fn oof_predictions(train: &Dataset, spec: &LearnerSpec, scheme: &OofScheme, seed: u64) -> Result<Vec<f64>> {
    oof_predictions_with(train, scheme, |fold, d| {
        fit_learner(&spec.with_seed(derive_seed(seed, fold as u64)), d)
    })
}

/// `n_rows x n_sub` matrix of out-of-fold predictions, columns in spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatures {
    pub matrix: Matrix,
    pub kinds: Vec<String>,
}

const SUB_KINDS: [&str; 4] = ["gbdt", "ordered_boost", "random_forest", "extra_trees"];

fn check_sub_learners(specs: &[LearnerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::invalid("sub_learners", "at least one sub-learner is required"));
    }
    for (i, s) in specs.iter().enumerate() {
        if !SUB_KINDS.contains(&s.kind()) {
            return Err(Error::invalid(
                "sub_learners",
                format!("{} cannot be a sub-learner (allowed: {})", s.kind(), SUB_KINDS.join(", ")),
            ));
        }
        if specs[..i].iter().any(|o| o.kind() == s.kind()) {
            return Err(Error::invalid("sub_learners", format!("duplicate kind {}", s.kind())));
        }
        s.validate()?;
    }
    Ok(())
}

fn sub_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, 0x5ab0 + i as u64)
}

pub fn build_meta_features(
    train: &Dataset,
    specs: &[LearnerSpec],
    scheme: &OofScheme,
    seed: u64,
) -> Result<MetaFeatures> {
    check_sub_learners(specs)?;
    let blocks = scheme.blocks(train.n_rows())?.len();
    // one job per (sub-learner, block) so the pool stays busy
    let jobs = exec::try_map_indexed(specs.len() * blocks, |j| {
        let (i, b) = (j / blocks, j % blocks);
        let s = specs[i].with_seed(derive_seed(sub_seed(seed, i), b as u64));
        oof_block(train, scheme, b, &s)
    })?;
    let cols: Vec<Vec<f64>> = jobs.chunks(blocks).map(|c| c.concat()).collect();
    Ok(MetaFeatures {
        matrix: Matrix::from_columns(&cols)?,
        kinds: specs.iter().map(|s| s.kind().to_string()).collect(),
    })
}

fn oof_block(train: &Dataset, scheme: &OofScheme, b: usize, spec: &LearnerSpec) -> Result<Vec<f64>> {
    let n = train.n_rows();
    let (lo, hi) = scheme.blocks(n)?[b];
    let rows: Vec<usize> = match scheme.mode {
        OofMode::ContiguousBlocks => (0..lo).chain(hi..n).collect(),
        OofMode::ForwardChain => (0..lo).collect(),
    };
    if rows.is_empty() {
        let mean = train.y().iter().sum::<f64>() / n as f64;
        return Ok(vec![mean; hi - lo]);
    }
    fit_learner(spec, &train.select_rows(&rows))?.predict(&train.x().slice_rows(lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterKind {
    Mlp,
    Linear,
    Ridge,
}

impl MasterKind {
    pub fn name(self) -> &'static str {
        match self {
            MasterKind::Mlp => "mlp",
            MasterKind::Linear => "linear",
            MasterKind::Ridge => "ridge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterSpec {
    pub kind: MasterKind,
    pub arch: MlpArch,
    pub train: MlpTrainConfig,
    pub ridge_l2: f64,
}

impl Default for MasterSpec {
    /// Small network for the low-dimensional meta-features.
    fn default() -> Self {
        Self {
            kind: MasterKind::Mlp,
            arch: MlpArch { hidden_sizes: vec![16] },
            train: MlpTrainConfig {
                learning_rate: 1e-3,
                max_epochs: 200,
                ..MlpTrainConfig::default()
            },
            ridge_l2: 1.0,
        }
    }
}

impl MasterSpec {
    pub fn of_kind(kind: MasterKind) -> Self {
        Self { kind, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Master {
    Mlp(Mlp),
    Linear(LinearModel),
}

impl Master {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Master::Mlp(m) => m.predict(x),
            Master::Linear(m) => m.predict(x),
        }
    }

    fn width(&self) -> usize {
        match self {
            Master::Mlp(m) => m.n_inputs(),
            Master::Linear(m) => m.weights.len(),
        }
    }
}

pub fn fit_master(meta: &Matrix, y: &[f64], spec: &MasterSpec, seed: u64) -> Result<Master> {
    let r = match spec.kind {
        MasterKind::Mlp => {
            let cfg = MlpTrainConfig { seed, ..spec.train.clone() };
            fit_mlp(meta, y, &spec.arch, &cfg).map(Master::Mlp)
        }
        MasterKind::Linear => fit_linear(meta, y, 0.0).map(Master::Linear),
        MasterKind::Ridge => fit_linear(meta, y, spec.ridge_l2).map(Master::Linear),
    };
    r.map_err(|e| Error::Learner {
        learner: format!("{} master", spec.kind.name()),
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackSpec {
    pub sub_learners: Vec<LearnerSpec>,
    pub master: MasterSpec,
    pub oof: OofScheme,
    pub seed: u64,
}

impl Default for StackSpec {
    /// The four sub-learners at their reference settings.
    fn default() -> Self {
        Self {
            sub_learners: vec![
                LearnerSpec::Gbdt(BoostParams::default()),
                LearnerSpec::OrderedBoost(BoostParams::ordered_default()),
                LearnerSpec::RandomForest(ForestParams::random_forest()),
                LearnerSpec::ExtraTrees(ForestParams::extra_trees()),
            ],
            master: MasterSpec::default(),
            oof: OofScheme::default(),
            seed: 0,
        }
    }
}

impl StackSpec {
    /// Reduced sizes that fit a ten-thousand-day series in seconds.
    pub fn desk() -> Self {
        Self {
            sub_learners: desk_sub_learners(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_sub_learners(&self.sub_learners)?;
        self.oof.validate()?;
        if self.master.kind == MasterKind::Mlp {
            self.master.train.validate()?;
        }
        if !(self.master.ridge_l2 >= 0.0 && self.master.ridge_l2.is_finite()) {
            return Err(Error::invalid("ridge_l2", "must be finite and >= 0"));
        }
        Ok(())
    }
}

pub fn desk_sub_learners() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::Gbdt(BoostParams {
            n_estimators: 120,
            learning_rate: 0.08,
            max_leaves: 31,
            max_depth: Some(8),
            max_bins: 63,
            ..BoostParams::default()
        }),
        LearnerSpec::OrderedBoost(BoostParams {
            n_estimators: 100,
            learning_rate: 0.1,
            n_permutations: 2,
            max_bins: 63,
            ..BoostParams::ordered_default()
        }),
        LearnerSpec::RandomForest(ForestParams {
            n_estimators: 25,
            max_depth: Some(12),
            min_samples_leaf: 2,
            ..ForestParams::random_forest()
        }),
        LearnerSpec::ExtraTrees(ForestParams {
            n_estimators: 25,
            max_depth: Some(12),
            min_samples_leaf: 2,
            ..ForestParams::extra_trees()
        }),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub sub_models: Vec<Model>,
    pub master_kind: MasterKind,
    pub master: Master,
    pub oof: OofScheme,
}

impl StackedModel {
    pub fn new(sub_models: Vec<Model>, master_kind: MasterKind, master: Master, oof: OofScheme) -> Result<Self> {
        if sub_models.is_empty() {
            return Err(Error::invalid("sub_models", "at least one sub-model is required"));
        }
        if master.width() != sub_models.len() {
            return Err(Error::DimensionMismatch {
                expected: sub_models.len(),
                got: master.width(),
            });
        }
        let nf = sub_models[0].n_features();
        if let Some(m) = sub_models.iter().find(|m| m.n_features() != nf) {
            return Err(Error::DimensionMismatch {
                expected: nf,
                got: m.n_features(),
            });
        }
        Ok(Self {
            sub_models,
            master_kind,
            master,
            oof,
        })
    }

    /// Level-0 predictions, one column per sub-model.
    pub fn sub_predictions(&self, x: &Matrix) -> Result<Matrix> {
        let cols = self
            .sub_models
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_columns(&cols)
    }
}

impl Regressor for StackedModel {
    fn n_features(&self) -> usize {
        self.sub_models[0].n_features()
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let meta = self.sub_predictions(x)?;
        self.master.predict(&meta)
    }
}

/// Fits every sub-learner on all of `train`, in spec order.
pub fn refit_sub_learners(train: &Dataset, specs: &[LearnerSpec], seed: u64) -> Result<Vec<Model>> {
    check_sub_learners(specs)?;
    exec::try_map_indexed(specs.len(), |i| fit_learner(&specs[i].with_seed(sub_seed(seed, i)), train))
}

/// Assembles a stack from precomputed meta-features and refitted sub-models,
/// so several masters can share one set of level-0 fits.
pub fn fit_meta_with_parts(
    train: &Dataset,
    spec: &StackSpec,
    meta: &MetaFeatures,
    sub_models: Vec<Model>,
) -> Result<StackedModel> {
    let master = fit_master(&meta.matrix, train.y(), &spec.master, derive_seed(spec.seed, 0x3a57))?;
    StackedModel::new(sub_models, spec.master.kind, master, spec.oof.clone())
}

pub fn fit_meta(train: &Dataset, spec: &StackSpec) -> Result<StackedModel> {
    spec.validate()?;
    let meta = build_meta_features(train, &spec.sub_learners, &spec.oof, spec.seed)?;
    let subs = refit_sub_learners(train, &spec.sub_learners, spec.seed)?;
    fit_meta_with_parts(train, spec, &meta, subs)
}
