use criterion::{criterion_group, criterion_main, Criterion};
use genhop_core::io::csl_dataset;
use genhop_core::model::{init_params, ModelConfig};
use genhop_core::train::{pretrain_from, TrainConfig};

// One epoch over a single batch is one optimizer step.
fn step(c: &mut Criterion) {
    let ds = csl_dataset(41, 4, 0).unwrap();
    let graphs: Vec<_> = ds.graphs.into_iter().take(32).collect();
    let model = ModelConfig {
        node_feature_dim: graphs[0].node_features().cols(),
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        epochs: 1,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let params = init_params(&model, 0).unwrap();
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    group.bench_function("csl41_batch32", |b| {
        b.iter(|| pretrain_from(&graphs, &train, params.clone(), 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, step);
criterion_main!(benches);
