//! Sequential vs parallel execution of the two data-parallel hot spots:
//! Monte-Carlo safety checks and benchmark sweeps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use safex::belief::grid::GridBeliefConfig;
use safex::belief::{Belief, GridHeightBelief};
use safex::env::gen_random_grid;
use safex::explorer::{self, evaluate_safety, Mode, SafetyCheck, SafetyConfig};
use safex::harness::{run_benchmark, BenchmarkSpec};
use safex::lattice::Visibility;
use safex::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn safety_check(c: &mut Criterion) {
    let world = gen_random_grid(10, 10, 0.2, 4).unwrap();
    let mut belief = GridHeightBelief::new(world.lattice, GridBeliefConfig::default());
    belief.update(&world.observe(world.start, Visibility::N4));
    let (_, _, log) = explorer::step(&belief, world.start, &SafetyConfig::safe(0.9)).unwrap();
    let mut g = c.benchmark_group("evaluate_safety");
    for (name, execution) in MODES {
        let check = SafetyCheck {
            n_samples: 20_000,
            execution,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(evaluate_safety(&belief, &log, &check)))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_benchmark");
    g.sample_size(10);
    for (name, execution) in MODES {
        let spec = BenchmarkSpec {
            sizes: vec![(10, 10)],
            wall_fractions: vec![0.2],
            deltas: vec![1.0],
            seeds: (0..8).collect(),
            explorers: vec![Mode::Safe, Mode::Unsafe],
            execution,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| black_box(run_benchmark(&spec))));
    }
    g.finish();
}

criterion_group!(benches, safety_check, sweep);
criterion_main!(benches);
