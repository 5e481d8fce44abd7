//! One function per subcommand. Each reads only the config and its input
//! files and writes its outputs under the run's output directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use stackcast::artifact::ModelArtifact;
use stackcast::dataset::{
    build_lagged, load_csv, load_csv_with_codes, ordinal_to_date, synth, synth_generate, temporal_split, write_csv,
    Dataset,
};
use stackcast::explain::{shap_summary, Background, ShapMode};
use stackcast::learner::{fit_learner, LearnerSpec, Model, Regressor};
use stackcast::meta::Master;
use stackcast::metrics::{compute_all, pearson_r, summarize, MetricReport};
use stackcast::selection::{ablate_groups, groups_by_name, rfe};
use stackcast::tuner::{apply_params, dno_optimize, encode_params, grid_search, holdout_objective, DnoConfig};
use stackcast::{Error, Result};

use crate::config::{ExplainMode, RunConfig};
use crate::output::{num, opt, write_json, write_rows};

pub const DATA_FILE: &str = "ed_synthetic.csv";
pub const MODEL_FILE: &str = "model.json";

/// Fails with the path in the message when `path` cannot be read.
fn require_file(path: &Path) -> Result<()> {
    std::fs::metadata(path)
        .map(|_| ())
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// The configured input series, before lag expansion.
pub fn load_raw(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data.path {
        Some(p) => {
            require_file(Path::new(p))?;
            load_csv(p, &cfg.input_schema())
        }
        None => synth_generate(&cfg.synth_config(cfg.seed)?),
    }
}

/// Lag-expanded train and test sets.
pub fn prepare(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let lagged = build_lagged(&load_raw(cfg)?, &cfg.lag_spec()?)?;
    temporal_split(&lagged, cfg.split.test_fraction)
}

fn test_r(model: &Model, test: &Dataset) -> Result<f64> {
    pearson_r(test.y(), &model.predict(test.x())?)
}

pub fn gen_data(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    let d = synth_generate(&cfg.synth_config(cfg.seed)?)?;
    let data_path = out.join(DATA_FILE);
    write_csv(&d, &data_path)?;
    let mut template = cfg.clone();
    template.data.path = Some(data_path.to_string_lossy().into_owned());
    template.data.schema = Some(synth::PRESET_ED_DAILY.into());
    std::fs::write(out.join("stackcast.toml"), template.to_toml()?)?;
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    let (train, _) = prepare(cfg)?;
    let model = fit_learner(&cfg.stack.model_spec(cfg.seed), &train)?;
    let trace: Option<Vec<f64>> = match &model {
        Model::Stack(s) => match &s.master {
            Master::Mlp(m) => Some(m.loss_trace.clone()),
            Master::Linear(_) => None,
        },
        m => m.loss_trace().map(<[f64]>::to_vec),
    };
    if let Some(t) = trace {
        let rows = t.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), num(*l)]);
        write_rows(&out.join("loss_trace.csv"), &["iteration", "train_loss"], rows)?;
    }
    let artifact = ModelArtifact::new(model, &train, cfg.input_schema(), cfg.lag_spec()?, cfg.seed, cfg.hash()?)?;
    artifact.save(out.join(MODEL_FILE))
}

fn time_label(d: &Dataset, i: usize) -> String {
    match d.time_name() {
        Some(_) => ordinal_to_date(d.time_index()[i]).to_string(),
        None => i.to_string(),
    }
}

pub fn predict(cfg: &RunConfig, model: &Path, input: &Path) -> Result<()> {
    require_file(model)?;
    require_file(input)?;
    let a = ModelArtifact::load(model)?;
    let d = load_csv_with_codes(input, &a.input_schema, Some(&a.code_maps))?;
    let d = build_lagged(&d, &a.lags)?;
    a.check_dataset(&d)?;
    let p = a.predict(d.x())?;
    let rows = (0..d.n_rows()).map(|i| vec![time_label(&d, i), num(d.y()[i]), num(p[i])]);
    let time = d.time_name().unwrap_or("row").to_string();
    write_rows(&cfg.out_dir().join("predictions.csv"), &[&time, "actual", "prediction"], rows)
}

#[derive(Serialize)]
struct StatRow {
    mean: Option<f64>,
    std: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    model: &'a str,
    seeds: Vec<u64>,
    runs: Vec<MetricReport>,
    summary: BTreeMap<&'static str, StatRow>,
}

pub fn evaluate(cfg: &RunConfig, repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(Error::invalid("repeats", "must be >= 1"));
    }
    let out = cfg.out_dir();
    let (train, test) = prepare(cfg)?;
    let seeds: Vec<u64> = (0..repeats as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let mut runs = Vec::with_capacity(repeats);
    for &s in &seeds {
        let m = fit_learner(&cfg.stack.model_spec(s), &train)?;
        runs.push(compute_all(test.y(), &m.predict(test.x())?)?);
    }
    let sm = summarize(&runs);
    let names = MetricReport::NAMES;
    let mut header = vec!["statistic"];
    header.extend(names);
    let stat_rows = [("Mean", &sm.mean), ("STD", &sm.std), ("Min", &sm.min), ("Max", &sm.max)]
        .into_iter()
        .map(|(label, v)| std::iter::once(label.to_string()).chain(v.iter().map(|x| opt(*x))).collect());
    write_rows(&out.join("metrics_summary.csv"), &header, stat_rows)?;
    header[0] = "seed";
    let run_rows = seeds
        .iter()
        .zip(&runs)
        .map(|(s, r)| std::iter::once(s.to_string()).chain(r.values().iter().map(|x| opt(*x))).collect());
    write_rows(&out.join("metrics_runs.csv"), &header, run_rows)?;
    let summary = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            (*n, StatRow { mean: sm.mean[i], std: sm.std[i], min: sm.min[i], max: sm.max[i] })
        })
        .collect();
    let kind = cfg.stack.model_spec(cfg.seed).kind();
    write_json(&out.join("metrics.json"), &EvaluateReport { model: kind, seeds, runs, summary })
}

#[derive(Serialize)]
struct TuneReport {
    learner: &'static str,
    params: BTreeMap<String, f64>,
    holdout_r: f64,
    test_r_tuned: f64,
    test_r_base: f64,
    evaluations: usize,
    spec: LearnerSpec,
}

pub fn tune(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    let t = &cfg.tuner;
    let (train, test) = prepare(cfg)?;
    let defs = t.space()?;
    let base = t.base.with_seed(cfg.seed);
    let obj = holdout_objective(&train, &base, defs.clone(), t.valid_fraction)?;
    let dno = DnoConfig {
        seed: cfg.seed,
        max_evals: Some(t.max_evals),
        ..t.dno.clone()
    };
    let res = dno_optimize(|v| obj.evaluate(v), &defs, &dno)?;
    if !res.best_fitness.is_finite() {
        return Err(Error::Numeric("no candidate could be fitted and scored".into()));
    }
    let best = obj.spec_for(&res.best)?;
    let report = TuneReport {
        learner: base.kind(),
        params: encode_params(&defs, &res.best)?,
        holdout_r: res.best_fitness,
        test_r_tuned: test_r(&fit_learner(&best, &train)?, &test)?,
        test_r_base: test_r(&fit_learner(&base, &train)?, &test)?,
        evaluations: res.evaluations.len(),
        spec: best,
    };
    write_json(&out.join("best_params.json"), &report)?;

    let trace = res.trace.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            num(r.best_fitness),
            num(r.mean_fitness),
            r.nm_triggered.to_string(),
            r.evaluations.to_string(),
            r.non_finite.to_string(),
        ]
    });
    write_rows(
        &out.join("tune_trace.csv"),
        &["iteration", "best_fitness", "mean_fitness", "nm_triggered", "evaluations", "non_finite"],
        trace,
    )?;
    let mut header = vec!["evaluation"];
    header.extend(defs.iter().map(|d| d.name.as_str()));
    header.push("fitness");
    let evals = res
        .evaluations
        .iter()
        .enumerate()
        .map(|(i, e)| -> Result<Vec<String>> {
            let rec = encode_params(&defs, &e.values)?;
            let mut row = vec![i.to_string()];
            row.extend(defs.iter().map(|d| num(rec[&d.name])));
            row.push(num(e.fitness));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    write_rows(&out.join("tune_evaluations.csv"), &header, evals)?;

    if let Some(g) = &t.grid {
        let find = |name: &str| {
            defs.iter()
                .find(|d| d.name == name)
                .cloned()
                .ok_or_else(|| Error::invalid("tuner.grid", format!("`{name}` is not in the search space")))
        };
        let (p1, p2) = (find(&g.x)?, find(&g.y)?);
        let pair = [p1.clone(), p2.clone()];
        let surface = grid_search(
            |a, b| {
                let rec = BTreeMap::from([(p1.name.clone(), a), (p2.name.clone(), b)]);
                apply_params(&base, &pair, &rec)
                    .and_then(|s| obj.score_spec(&s))
                    .unwrap_or(f64::NAN)
            },
            &p1,
            &p2,
            g.x_points,
            g.y_points,
        )?;
        let rows = surface.long_rows().into_iter().map(|(a, b, f)| vec![num(a), num(b), num(f)]);
        write_rows(&out.join("grid_surface.csv"), &[&p1.name, &p2.name, "fitness"], rows)?;
    }
    Ok(())
}

pub fn select(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    let (train, _) = prepare(cfg)?;
    let spec = match &cfg.rfe.learner {
        Some(l) => l.with_seed(cfg.seed),
        None => cfg.stack.model_spec(cfg.seed),
    };
    let (fit, valid) = temporal_split(&train, cfg.rfe.valid_fraction)?;
    let k = cfg.rfe.target_k.unwrap_or(train.n_features().div_ceil(2));
    let res = rfe(&fit, &valid, &spec, k, cfg.rfe.step)?;
    let rows = res
        .steps
        .iter()
        .map(|s| vec![s.n_features.to_string(), opt(s.valid_r), num(s.valid_mae)]);
    write_rows(&out.join("rfe_curve.csv"), &["n_features", "valid_r", "valid_mae"], rows)?;
    write_json(&out.join("rfe_result.json"), &res)
}

pub fn ablate(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    let raw = load_raw(cfg)?;
    let base = if cfg.ablate.include_lags {
        build_lagged(&raw, &cfg.lag_spec()?)?
    } else {
        raw
    };
    let (train, test) = temporal_split(&base, cfg.split.test_fraction)?;
    let named: Vec<(String, Vec<String>)> = match &cfg.ablate.groups {
        Some(g) => g.iter().map(|g| (g.name.clone(), g.features.clone())).collect(),
        None => synth::feature_groups(),
    };
    let groups = groups_by_name(&train, &named).map_err(|e| Error::invalid("ablate.groups", e.to_string()))?;
    let spec = match &cfg.ablate.learner {
        Some(l) => l.with_seed(cfg.seed),
        None => cfg.stack.model_spec(cfg.seed),
    };
    let rep = ablate_groups(&train, &test, &groups, &spec)?;
    let rows = rep.rows.iter().map(|r| {
        vec![
            r.group.clone(),
            r.excluded.len().to_string(),
            num(rep.r_full),
            num(r.r_ablated),
            num(r.impact_percent),
        ]
    });
    write_rows(
        &out.join("ablation.csv"),
        &["group", "n_excluded", "r_full", "r_ablated", "impact_percent"],
        rows,
    )?;
    write_json(&out.join("ablation.json"), &rep)
}

pub fn explain(cfg: &RunConfig, model_path: Option<&Path>) -> Result<()> {
    let out = cfg.out_dir();
    let e = &cfg.explain;
    let (train, test) = prepare(cfg)?;
    let model = match model_path {
        Some(p) => {
            require_file(p)?;
            let a = ModelArtifact::load(p)?;
            a.check_dataset(&train)?;
            a.model
        }
        None => fit_learner(&cfg.stack.model_spec(cfg.seed), &train)?,
    };
    let rows = test.slice_rows(0, e.rows.min(test.n_rows()));
    let bg = Background::sample(train.x(), e.background, cfg.seed)?;
    let mode = match e.mode {
        ExplainMode::Exact => ShapMode::Exact,
        ExplainMode::Sampled => ShapMode::Sampled { n_samples: e.n_samples },
        ExplainMode::Auto => ShapMode::Auto { n_samples: e.n_samples },
    };
    let sm = shap_summary(&model, rows.x(), &bg, mode, cfg.seed)?;
    let names = train.feature_names();

    let summary = sm
        .mean_abs
        .iter()
        .enumerate()
        .map(|(rank, (j, v))| vec![(rank + 1).to_string(), names[*j].clone(), num(*v)]);
    write_rows(&out.join("shap_summary.csv"), &["rank", "feature", "mean_abs_shap"], summary)?;

    let mut header = vec!["row"];
    header.extend(names.iter().map(String::as_str));
    header.extend(["base_value", "prediction"]);
    let values = sm.reports.iter().enumerate().map(|(i, r)| {
        let mut row = vec![time_label(&rows, i)];
        row.extend(r.attributions.iter().map(|v| num(*v)));
        row.extend([num(r.base_value), num(r.prediction)]);
        row
    });
    write_rows(&out.join("shap_values.csv"), &header, values)?;

    for &w in e.waterfall.iter().filter(|&&w| w < sm.reports.len()) {
        let r = &sm.reports[w];
        let mut acc = r.base_value;
        let mut lines = vec![vec!["0".into(), "base_value".into(), String::new(), String::new(), num(acc)]];
        for (k, (j, value, attr)) in r.waterfall().into_iter().enumerate() {
            acc += attr;
            lines.push(vec![(k + 1).to_string(), names[j].clone(), num(value), num(attr), num(acc)]);
        }
        write_rows(
            &out.join(format!("waterfall_{w}.csv")),
            &["step", "feature", "value", "attribution", "cumulative"],
            lines,
        )?;
    }
    Ok(())
}
