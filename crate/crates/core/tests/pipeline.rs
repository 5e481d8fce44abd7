use stackcast::artifact::ModelArtifact;
use stackcast::boosting::BoostParams;
use stackcast::dataset::{build_lagged, synth, synth_generate, temporal_split, LagSpec, SynthConfig};
use stackcast::learner::{fit_learner, LearnerSpec, Regressor};
use stackcast::meta::StackSpec;
use stackcast::metrics::compute_all;
use stackcast::trees::ForestParams;

fn small_stack() -> StackSpec {
    let boost = BoostParams { n_estimators: 20, learning_rate: 0.1, max_bins: 31, ..BoostParams::default() };
    let forest = ForestParams { n_estimators: 5, max_depth: Some(6), ..ForestParams::random_forest() };
    StackSpec {
        sub_learners: vec![LearnerSpec::Gbdt(boost), LearnerSpec::RandomForest(forest)],
        ..StackSpec::desk()
    }
}

#[test]
fn synthetic_series_to_saved_stack() {
    let lags = LagSpec::new(vec![1, 7]).unwrap();
    let raw = synth_generate(&SynthConfig { n_days: 1500, seed: 4, max_delay: 7, ..SynthConfig::default() }).unwrap();
    let d = build_lagged(&raw, &lags).unwrap();
    assert_eq!(d.n_rows(), raw.n_rows() - 7);
    let (train, test) = temporal_split(&d, 0.2).unwrap();

    let model = fit_learner(&LearnerSpec::Stack(Box::new(small_stack())), &train).unwrap();
    let pred = model.predict(test.x()).unwrap();
    let report = compute_all(test.y(), &pred).unwrap();
    assert!(report.r.unwrap() > 0.5, "{report:?}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ModelArtifact::new(model, &train, synth::file_schema(), lags, 4, String::new())
        .unwrap()
        .save(&path)
        .unwrap();
    let loaded = ModelArtifact::load(&path).unwrap();
    let again = loaded.predict(test.x()).unwrap();
    assert!(pred.iter().zip(&again).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn same_seed_same_stack() {
    let raw = synth_generate(&SynthConfig { n_days: 900, seed: 8, max_delay: 1, ..SynthConfig::default() }).unwrap();
    let (train, test) = temporal_split(&raw, 0.25).unwrap();
    let spec = LearnerSpec::Stack(Box::new(StackSpec { seed: 3, ..small_stack() }));
    let a = fit_learner(&spec, &train).unwrap().predict(test.x()).unwrap();
    let b = fit_learner(&spec, &train).unwrap().predict(test.x()).unwrap();
    assert_eq!(a, b);
}
