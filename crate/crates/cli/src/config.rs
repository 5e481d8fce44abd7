//! Run configuration: one TOML file with a section per stage. Any key can be
//! overridden with `--set section.key=value`; `--seed` and `--out` override
//! the top-level keys of the same name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stackcast::artifact::sha256_hex;
use stackcast::boosting::BoostParams;
use stackcast::dataset::{synth, ColumnSchema, LagSpec, SynthConfig};
use stackcast::learner::LearnerSpec;
use stackcast::meta::{MasterSpec, OofScheme, StackSpec};
use stackcast::tuner::{default_space, DnoConfig, ParamDef};
use stackcast::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: String,
    pub data: DataSection,
    pub lags: LagsSection,
    pub split: SplitSection,
    pub stack: StackSection,
    pub tuner: TunerSection,
    pub rfe: RfeSection,
    pub ablate: AblateSection,
    pub explain: ExplainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: "out".into(),
            data: DataSection::default(),
            lags: LagsSection::default(),
            split: SplitSection::default(),
            stack: StackSection::default(),
            tuner: TunerSection::default(),
            rfe: RfeSection::default(),
            ablate: AblateSection::default(),
            explain: ExplainSection::default(),
        }
    }
}

/// Input data. Without `path` a synthetic series is generated in memory
/// from `[data.synth]` and the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<String>,
    /// Named column layout; `ed_daily` is the layout `gen-data` writes.
    pub schema: Option<String>,
    /// Explicit column layout, instead of `schema`.
    pub columns: Option<Vec<ColumnSchema>>,
    pub synth: SynthSection,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: None,
            schema: None,
            columns: None,
            synth: SynthSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_days: usize,
    pub start: String,
    pub base: f64,
    pub trend: f64,
    pub weekly_amplitude: f64,
    pub annual_amplitude: f64,
    pub climate_coupling: f64,
    pub noise: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            n_days: s.n_days,
            start: s.start,
            base: s.base,
            trend: s.trend,
            weekly_amplitude: s.weekly_amplitude,
            annual_amplitude: s.annual_amplitude,
            climate_coupling: s.climate_coupling,
            noise: s.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagsSection {
    pub delays: Vec<usize>,
}

impl Default for LagsSection {
    fn default() -> Self {
        Self {
            delays: LagSpec::default().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackPreset {
    /// Reduced sub-learner sizes.
    Desk,
    /// Sub-learners at their reference settings.
    Reference,
}

/// The model trained by `train`, `evaluate` and `explain`, and the default
/// for `select` and `ablate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackSection {
    pub preset: StackPreset,
    /// A single learner to use in place of the stack.
    pub learner: Option<LearnerSpec>,
    pub sub_learners: Option<Vec<LearnerSpec>>,
    pub master: Option<MasterSpec>,
    pub oof: Option<OofScheme>,
}

impl Default for StackSection {
    fn default() -> Self {
        Self {
            preset: StackPreset::Desk,
            learner: None,
            sub_learners: None,
            master: None,
            oof: None,
        }
    }
}

impl StackSection {
    pub fn model_spec(&self, seed: u64) -> LearnerSpec {
        if let Some(l) = &self.learner {
            return l.with_seed(seed);
        }
        let mut s = match self.preset {
            StackPreset::Desk => StackSpec::desk(),
            StackPreset::Reference => StackSpec::default(),
        };
        if let Some(v) = &self.sub_learners {
            s.sub_learners = v.clone();
        }
        if let Some(m) = &self.master {
            s.master = m.clone();
        }
        if let Some(o) = &self.oof {
            s.oof = o.clone();
        }
        s.seed = seed;
        LearnerSpec::Stack(Box::new(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerSection {
    pub max_evals: usize,
    /// Trailing share of the training rows used to score candidates.
    pub valid_fraction: f64,
    pub base: LearnerSpec,
    /// Search space; defaults to the built-in space for `base`'s kind.
    pub space: Option<Vec<ParamDef>>,
    pub dno: DnoConfig,
    pub grid: Option<GridSection>,
}

impl Default for TunerSection {
    fn default() -> Self {
        Self {
            max_evals: 50,
            valid_fraction: 0.2,
            base: LearnerSpec::Gbdt(BoostParams::default()),
            space: None,
            dno: DnoConfig::default(),
            grid: None,
        }
    }
}

impl TunerSection {
    pub fn space(&self) -> Result<Vec<ParamDef>> {
        match &self.space {
            Some(s) => Ok(s.clone()),
            None => default_space(self.base.kind()),
        }
    }
}

/// Two-parameter sweep reported as a fitness surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x: String,
    pub y: String,
    #[serde(default = "default_grid_points")]
    pub x_points: usize,
    #[serde(default = "default_grid_points")]
    pub y_points: usize,
}

fn default_grid_points() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfeSection {
    /// Defaults to half the feature count.
    pub target_k: Option<usize>,
    pub step: usize,
    pub valid_fraction: f64,
    /// Defaults to the `[stack]` model.
    pub learner: Option<LearnerSpec>,
}

impl Default for RfeSection {
    fn default() -> Self {
        Self {
            target_k: None,
            step: 1,
            valid_fraction: 0.2,
            learner: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub name: String,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    /// Add the lagged-target columns before ablating. Off by default: lagged
    /// targets carry the calendar signal and mask the temporal group.
    pub include_lags: bool,
    /// Defaults to the `[stack]` model.
    pub learner: Option<LearnerSpec>,
    /// Defaults to the built-in groups of the `ed_daily` layout.
    pub groups: Option<Vec<GroupSection>>,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            include_lags: false,
            learner: None,
            groups: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMode {
    Exact,
    Sampled,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub mode: ExplainMode,
    /// Permutations per explained row in sampled mode.
    pub n_samples: usize,
    pub background: usize,
    /// Leading test rows to explain.
    pub rows: usize,
    /// Rows (indices into the explained rows) that get a waterfall file.
    pub waterfall: Vec<usize>,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            mode: ExplainMode::Auto,
            n_samples: 64,
            background: 100,
            rows: 10,
            waterfall: vec![0],
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides, then validates.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::invalid("config", format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::invalid("config", one_line(e.message())))?
            }
            None => toml::Table::new(),
        };
        for s in sets {
            apply_set(&mut table, s)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid("config", one_line(e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lag_spec()?;
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::invalid("split.test_fraction", "must be in (0, 1)"));
        }
        if self.data.schema.is_some() && self.data.columns.is_some() {
            return Err(Error::invalid("data.columns", "give either data.schema or data.columns"));
        }
        if let Some(s) = &self.data.schema {
            if s != synth::PRESET_ED_DAILY {
                return Err(Error::invalid("data.schema", format!("unknown schema `{s}`")));
            }
        }
        if self.data.path.is_none() {
            self.synth_config(self.seed)?.validate()?;
        }
        self.stack.model_spec(self.seed).validate()?;
        if self.tuner.max_evals == 0 {
            return Err(Error::invalid("tuner.max_evals", "must be >= 1"));
        }
        for d in self.tuner.space()? {
            d.validate()?;
        }
        self.tuner.base.validate()?;
        self.tuner.dno.validate()?;
        if let Some(g) = &self.tuner.grid {
            if g.x_points < 2 || g.y_points < 2 {
                return Err(Error::invalid("tuner.grid", "needs at least 2 points per axis"));
            }
        }
        if self.rfe.step == 0 {
            return Err(Error::invalid("rfe.step", "must be >= 1"));
        }
        for (key, f) in [
            ("tuner.valid_fraction", self.tuner.valid_fraction),
            ("rfe.valid_fraction", self.rfe.valid_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(key, "must be in (0, 1)"));
            }
        }
        for l in [&self.rfe.learner, &self.ablate.learner].into_iter().flatten() {
            l.validate()?;
        }
        if self.explain.background == 0 || self.explain.rows == 0 {
            return Err(Error::invalid("explain", "background and rows must be >= 1"));
        }
        if self.explain.mode != ExplainMode::Exact && self.explain.n_samples == 0 {
            return Err(Error::invalid("explain.n_samples", "must be >= 1"));
        }
        if let Some(&w) = self.explain.waterfall.iter().find(|&&w| w >= self.explain.rows) {
            return Err(Error::invalid("explain.waterfall", format!("row {w} is not among the {} explained rows", self.explain.rows)));
        }
        Ok(())
    }

    pub fn lag_spec(&self) -> Result<LagSpec> {
        LagSpec::new(self.lags.delays.clone()).map_err(|e| rename(e, "lags.delays"))
    }

    /// Generator settings for in-memory or `gen-data` series.
    pub fn synth_config(&self, seed: u64) -> Result<SynthConfig> {
        let s = &self.data.synth;
        Ok(SynthConfig {
            n_days: s.n_days,
            seed,
            base: s.base,
            trend: s.trend,
            weekly_amplitude: s.weekly_amplitude,
            annual_amplitude: s.annual_amplitude,
            climate_coupling: s.climate_coupling,
            noise: s.noise,
            start: s.start.clone(),
            max_delay: self.lag_spec()?.max_delay(),
            preset: synth::PRESET_ED_DAILY.into(),
        })
    }

    /// Column layout of the input file.
    pub fn input_schema(&self) -> Vec<ColumnSchema> {
        match &self.data.columns {
            Some(c) => c.clone(),
            None => synth::file_schema(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.out)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Digest of the effective configuration, output location excluded.
    pub fn hash(&self) -> Result<String> {
        let c = RunConfig { out: String::new(), ..self.clone() };
        Ok(sha256_hex(serde_json::to_string(&c)?.as_bytes()))
    }
}

fn rename(e: Error, key: &str) -> Error {
    match e {
        Error::InvalidParam { reason, .. } => Error::invalid(key, reason),
        other => other,
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Sets a dotted key, parsing the value as TOML and falling back to a bare
/// string.
fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid("--set", format!("`{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::invalid("--set", format!("bad key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::invalid(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str, sets: &[&str]) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        RunConfig::load(Some(&p), &sets)
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(load_str("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_names_the_key() {
        let e = load_str("[split]\ntest_fraktion = 0.3\n", &[]).unwrap_err();
        assert!(e.to_string().contains("test_fraktion"), "{e}");
        let e = load_str("[stack.master]\nkind = \"mlp\"\nbogus = 1\n", &[]).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn set_overrides_file() {
        let c = load_str("[split]\ntest_fraction = 0.3\n", &["split.test_fraction=0.25", "rfe.step=3"]).unwrap();
        assert_eq!(c.split.test_fraction, 0.25);
        assert_eq!(c.rfe.step, 3);
    }

    #[test]
    fn single_learner_table() {
        let c = load_str("[stack.learner]\nkind = \"extra_trees\"\nn_estimators = 7\n", &[]).unwrap();
        match c.stack.model_spec(5) {
            LearnerSpec::ExtraTrees(p) => {
                assert_eq!(p.n_estimators, 7);
                assert_eq!(p.seed, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn template_round_trips() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(load_str(&text, &[]).unwrap(), c);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(load_str("[split]\ntest_fraction = 1.5\n", &[]).is_err());
        assert!(load_str("[lags]\ndelays = [0]\n", &[]).is_err());
        assert!(load_str("[data]\nschema = \"nope\"\n", &[]).is_err());
        assert!(load_str("[explain]\nrows = 2\nwaterfall = [2]\n", &[]).is_err());
    }
}
