use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stf_spde::fixed_point::{picard_iterate, staircase_construct};
use stf_spde::solver::{Example, FrozenSolver, SolverConfig};
use stf_spde::verify::reference_problem;
use stf_spde::wiener::sample_ensemble;
use stf_spde::{Execution, HaarLevel, TimeGrid};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn setup(example: Example) -> (FrozenSolver, HaarLevel, TimeGrid) {
    let problem = reference_problem(example, 32).unwrap();
    let level = HaarLevel::new(3, problem.initial.clone()).unwrap();
    let solver = FrozenSolver::new(problem, SolverConfig::default()).unwrap();
    (solver, level, TimeGrid::new(1.0, 256, Some(3)).unwrap())
}

fn staircase_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("staircase_64_paths");
    group.sample_size(10);
    for example in [Example::HeatSqrtDrift, Example::PorousSqrtDrift { m: 2.0 }] {
        let (solver, level, time) = setup(example);
        let noises = sample_ensemble(&solver.problem().qwiener, time, 1, 64, Execution::Parallel);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, example.name()), &exec, |b, &exec| {
                b.iter(|| exec.try_map(noises.len(), |i| staircase_construct(&solver, &level, &noises[i])).unwrap())
            });
        }
    }
    group.finish();
}

fn picard_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("picard_32_paths");
    group.sample_size(10);
    let (solver, level, time) = setup(Example::HeatSqrtDrift);
    let noises = sample_ensemble(&solver.problem().qwiener, time, 2, 32, Execution::Parallel);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(picard_iterate(&solver, &level, &noises, 0.0, 16, None, exec).unwrap()))
        });
    }
    group.finish();
}

fn noise_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_256_paths");
    let (solver, _, time) = setup(Example::HeatSqrtDrift);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| sample_ensemble(&solver.problem().qwiener, time, 3, 256, exec)));
    }
    group.finish();
}

criterion_group!(benches, staircase_ensemble, picard_ensemble, noise_sampling);
criterion_main!(benches);
