//! Rayon pool vs a single worker on the hot data-parallel paths.
//! A one-thread pool runs the same code the `--no-default-features` build
//! runs sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stackcast::dataset::{build_lagged, synth_generate, temporal_split, Dataset, LagSpec, SynthConfig};
use stackcast::explain::{shap_sampled, Background};
use stackcast::learner::{fit_learner, LearnerSpec};
use stackcast::meta::{build_meta_features, StackSpec};
use stackcast::trees::ForestParams;

fn data() -> Dataset {
    let d = synth_generate(&SynthConfig { n_days: 2000, seed: 1, max_delay: 7, ..SynthConfig::default() }).unwrap();
    let lagged = build_lagged(&d, &LagSpec::new(vec![1, 7]).unwrap()).unwrap();
    temporal_split(&lagged, 0.2).unwrap().0
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut v = vec![("1".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if all > 1 {
        v.push((all.to_string(), rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()));
    }
    v
}

fn bench(c: &mut Criterion) {
    let train = data();
    let forest = LearnerSpec::RandomForest(ForestParams { n_estimators: 16, max_depth: Some(8), ..ForestParams::random_forest() });
    let stack = StackSpec::desk();
    let model = fit_learner(&forest, &train).unwrap();
    let bg = Background::sample(train.x(), 20, 0).unwrap();
    let row = train.x().row(0).to_vec();

    let mut g = c.benchmark_group("parallel");
    g.sample_size(10);
    for (threads, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("forest_fit", &threads), &pool, |b, p| {
            b.iter(|| p.install(|| fit_learner(&forest, &train).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("stack_oof", &threads), &pool, |b, p| {
            b.iter(|| p.install(|| build_meta_features(&train, &stack.sub_learners, &stack.oof, 0).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("shap_sampled", &threads), &pool, |b, p| {
            b.iter(|| p.install(|| shap_sampled(&model, &row, &bg, 64, 0).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
