//! Batch throughput: the data-parallel map against the sequential loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qlyap::exec;
use qlyap::scenario::config::Real;
use qlyap::scenario::{child_seeds, Scenario, ScenarioConfig};

fn scenario(t_final: f64) -> Scenario {
    let mut cfg = ScenarioConfig {
        preset: Some("qutrit_generic_stationary".into()),
        ..Default::default()
    };
    cfg.sim.t_final = Some(Real(t_final));
    Scenario::build(&cfg.resolve().unwrap()).unwrap()
}

fn batch(c: &mut Criterion) {
    let s = scenario(2.0);
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    for runs in [4usize, 16] {
        let seeds = child_seeds(s.config.seed, runs);
        group.bench_with_input(BenchmarkId::new("parallel", runs), &seeds, |b, seeds| {
            b.iter(|| exec::map(seeds, |&seed| s.run(seed).unwrap().summary.final_v))
        });
        group.bench_with_input(BenchmarkId::new("sequential", runs), &seeds, |b, seeds| {
            b.iter(|| exec::map_sequential(seeds, |&seed| s.run(seed).unwrap().summary.final_v))
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
