//! Fan-out throughput: the rayon-backed helpers against their sequential
//! baselines on the two workloads that dominate an audit, per-origin genetic
//! generation and per-set flip scoring. Run with `cargo bench`; pass
//! `--no-default-features` to measure the plain-iteration build instead,
//! or set `AUDIT_WORKERS` to pin the pool width.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use cfaudit::cf::{genetic_generate, CounterfactualSet, GeneticParams};
use cfaudit::data::{
    encode, Dataset, FeatureSchema, FeatureSpec, RawTable, SensitiveSpec, TargetSpec,
};
use cfaudit::metrics::{flip_vector, ndccf_sample};
use cfaudit::model::{Classifier, ModelSpec, TrainView, TrainedModel};
use cfaudit::{par, seed};

const K: usize = 8;

fn fixture() -> (Dataset, TrainedModel, TrainedModel) {
    let schema = FeatureSchema::new(
        vec![
            FeatureSpec::numeric("f1", 0.0, 100.0),
            FeatureSpec::numeric("f2", 0.0, 10.0),
        ],
        vec![SensitiveSpec {
            name: "g".into(),
            privileged_value: "m".into(),
        }],
        TargetSpec {
            name: "y".into(),
            positive_value: "1".into(),
        },
    )
    .unwrap();
    let mut rows = Vec::new();
    for i in 0..200u32 {
        let f1 = f64::from(i) * 0.5;
        let f2 = f64::from((i * 37) % 100) / 10.0;
        let g = if f2 > 5.0 { "m" } else { "f" };
        let y = if f1 > 50.0 { "1" } else { "0" };
        rows.push(vec![f1.to_string(), f2.to_string(), g.into(), y.into()]);
    }
    let raw = RawTable {
        columns: vec!["f1".into(), "f2".into(), "g".into(), "y".into()],
        rows,
    };
    let data = encode(&raw, &schema).unwrap();
    let view = TrainView::decision(&data);
    let decision = ModelSpec::Logreg(Default::default())
        .train(&view, None)
        .unwrap();
    let sens = ModelSpec::Logreg(Default::default())
        .train(&TrainView::sensitive(&data, 0).unwrap(), None)
        .unwrap();
    (data, decision, sens)
}

fn rejected_origins(data: &Dataset, model: &TrainedModel, cap: usize) -> Vec<Vec<f64>> {
    data.x
        .iter()
        .filter(|x| model.predict(x) == 0)
        .take(cap)
        .cloned()
        .collect()
}

fn generate_one(
    data: &Dataset,
    decision: &TrainedModel,
    origin: &[f64],
    idx: usize,
) -> CounterfactualSet {
    let params = GeneticParams {
        population: 40,
        generations: 60,
        ..GeneticParams::for_k(K, seed::derive(5, &[idx as u64]))
    };
    genetic_generate(decision, origin, 1, K, &data.schema, &data.mad, &params).unwrap()
}

fn bench_generation(c: &mut Criterion) {
    let (data, decision, _) = fixture();
    let origins = rejected_origins(&data, &decision, 24);
    assert!(!origins.is_empty());

    let mut group = c.benchmark_group("genetic_generation");
    group.sample_size(20);
    group.throughput(Throughput::Elements(origins.len() as u64));
    group.bench_function("fan_out", |b| {
        b.iter(|| par::map_indexed(origins.len(), |i| generate_one(&data, &decision, &origins[i], i)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::map_indexed_seq(origins.len(), |i| generate_one(&data, &decision, &origins[i], i))
        })
    });
    group.finish();
}

fn bench_flip_scoring(c: &mut Criterion) {
    let (data, decision, sens) = fixture();
    let origins = rejected_origins(&data, &decision, 24);
    let sets: Vec<CounterfactualSet> = origins
        .iter()
        .enumerate()
        .map(|(i, x)| generate_one(&data, &decision, x, i))
        .collect();

    let score = |set: &CounterfactualSet| {
        let fv = flip_vector(&sens, set, 0, K).unwrap();
        ndccf_sample(&fv)
    };
    let mut group = c.benchmark_group("flip_scoring");
    group.throughput(Throughput::Elements(sets.len() as u64));
    group.bench_function("fan_out", |b| b.iter(|| par::map_collect(&sets, score)));
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_collect_seq(&sets, score))
    });
    group.finish();
}

criterion_group!(benches, bench_generation, bench_flip_scoring);
criterion_main!(benches);
