use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use imop_bench::observations;
use imop_core::estimators::{estimate_clustering, ClusteringConfig};
use imop_core::harness::{fixture, FixtureId};
use imop_core::loss::empirical_risk;
use imop_core::reform::{build_single_level_mqp_rhs, write_lp, BigMConfig};
use imop_core::solver::{front_points, grid_weights, solve_wp};

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    for id in [FixtureId::MqpRhs, FixtureId::MlpTriobj, FixtureId::Portfolio, FixtureId::Traffic] {
        let fx = fixture(id).unwrap();
        let dmp = fx.instance.apply(&fx.theta_true).unwrap();
        let w = grid_weights(dmp.p(), 5, 0).unwrap()[2].clone();
        g.bench_function(id.as_str(), |b| b.iter(|| solve_wp(black_box(&dmp), black_box(&w)).unwrap()));
    }
    g.finish();
}

fn loss(c: &mut Criterion) {
    let fx = fixture(FixtureId::MqpRhs).unwrap();
    let front = front_points(&fx.instance.apply(&fx.theta_true).unwrap(), &grid_weights(2, 41, 0).unwrap()).unwrap();
    let obs = observations(FixtureId::MqpRhs, 1000, 0).unwrap();
    c.bench_function("empirical_risk_n1000_k41", |b| b.iter(|| empirical_risk(black_box(&obs), black_box(&front)).unwrap()));
}

fn clustering(c: &mut Criterion) {
    let fx = fixture(FixtureId::MqpRhs).unwrap();
    let obs = observations(FixtureId::MqpRhs, 50, 1).unwrap();
    let weights = grid_weights(2, 11, 0).unwrap();
    let cfg = ClusteringConfig::default();
    let mut g = c.benchmark_group("estimate");
    g.sample_size(10);
    g.bench_function("clustering_mqp_rhs_n50_k11", |b| {
        b.iter(|| estimate_clustering(&fx.instance, black_box(&obs), &weights, &cfg).unwrap())
    });
    g.finish();
}

fn export(c: &mut Criterion) {
    let fx = fixture(FixtureId::MqpRhs).unwrap();
    let obs = observations(FixtureId::MqpRhs, 50, 2).unwrap();
    let weights = grid_weights(2, 11, 0).unwrap();
    c.bench_function("build_and_write_rhs_model_n50_k11", |b| {
        b.iter(|| write_lp(&build_single_level_mqp_rhs(&fx.instance, black_box(&obs), &weights, &BigMConfig::default()).unwrap()))
    });
}

criterion_group!(benches, forward, loss, clustering, export);
criterion_main!(benches);
