use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use detour_bench::{epoch_records, hidden_network, start_observation};
use detour_core::agent::{hard_weighted_em, run_epoch, AgentConfig};
use detour_core::discovery::{discover, sample_random_policy};
use detour_core::environment::WorldConfig;
use detour_core::network::{predict_joint, select_action_meu, DiscreteAction, TwoSliceNetwork};

fn inference(c: &mut Criterion) {
    let initial = TwoSliceNetwork::initial();
    let hidden = hidden_network();
    let obs = start_observation();
    let act = DiscreteAction::new(4, 5).unwrap();
    c.bench_function("predict_joint/initial", |b| {
        b.iter(|| predict_joint(black_box(&initial), &obs, &act, None).unwrap())
    });
    c.bench_function("predict_joint/hidden", |b| {
        b.iter(|| predict_joint(black_box(&hidden), &obs, &act, None).unwrap())
    });
    c.bench_function("select_action_meu/initial", |b| {
        b.iter(|| select_action_meu(black_box(&initial), &obs).unwrap())
    });
    c.bench_function("select_action_meu/hidden", |b| {
        b.iter(|| select_action_meu(black_box(&hidden), &obs).unwrap())
    });
}

fn learning(c: &mut Criterion) {
    let world = WorldConfig::default();
    let agent = AgentConfig::default();
    let initial = TwoSliceNetwork::initial();
    let hidden = hidden_network();
    let records = epoch_records(0);
    let mut group = c.benchmark_group("learning");
    group.sample_size(20);
    group.bench_function("run_epoch", |b| {
        b.iter(|| run_epoch(black_box(&initial), &world, &agent, 0, 0).unwrap())
    });
    group.bench_function("hard_weighted_em", |b| {
        b.iter(|| hard_weighted_em(black_box(&hidden), &records, &agent, 0, 0).unwrap())
    });
    let log = sample_random_policy(&world, 10_000, 20, 0).unwrap();
    group.bench_function("discover/10k", |b| b.iter(|| discover(black_box(&log), 0.05).unwrap()));
    group.finish();
}

criterion_group!(benches, inference, learning);
criterion_main!(benches);
