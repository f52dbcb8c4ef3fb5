use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nlclaw::exec::Execution;
use nlclaw::field::Grid;
use nlclaw::init::U0Spec;
use nlclaw::lab::{run_rate_study, uniform_times, RateOptions};
use nlclaw::physics::{make_kernel, KernelSpec, Mobility};
use nlclaw::solver::{run, Problem};
use nlclaw::verify::{check_lemma_a, check_lemma_b, kuznetsov_delta, random_lemma_instance, MollifierPair};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn step_problem(n: usize, horizon: f64) -> Problem {
    let g = Grid::line(n, 1.0).unwrap();
    let k = make_kernel(&KernelSpec::GaussianGradient { sigma: 0.1, strength: 1.0 }, &g).unwrap();
    let u0 = U0Spec::Step { left: 0.8, right: 0.2, interface: 0.0 }.build(&g).unwrap();
    Problem::new(u0, Arc::new(k), Mobility::logistic(), 1e-3, horizon).unwrap()
}

fn rate_study(c: &mut Criterion) {
    let p = step_problem(256, 0.1);
    let eps = [4e-3, 2e-3, 1e-3, 5e-4];
    let mut group = c.benchmark_group("rate_study");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = RateOptions { execution, ..RateOptions::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_rate_study(black_box(&p), &eps, 0.1, &opts).unwrap())
        });
    }
    group.finish();
}

fn lemma_suite(c: &mut Criterion) {
    let g = Grid::line(64, 1.0).unwrap();
    let mut group = c.benchmark_group("lemma_suite");
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                execution.map_range(100, |t| {
                    let inst = random_lemma_instance(&g, 1, t as u64).unwrap();
                    check_lemma_a(&inst).unwrap().pass && check_lemma_b(&inst).unwrap().pass
                })
            })
        });
    }
    group.finish();
}

fn kuznetsov_deltas(c: &mut Criterion) {
    let p = step_problem(64, 0.31);
    let times = uniform_times(0.31, 31);
    let u = run(&p.with_epsilon(0.0), &times).unwrap().trajectory;
    let v = run(&p, &times).unwrap().trajectory;
    let deltas = [0.02, 0.04, 0.08, 0.16];
    let mut group = c.benchmark_group("kuznetsov");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                execution.map(&deltas, |d| kuznetsov_delta(&u, &v, &p, MollifierPair::new(*d, 0.03).unwrap()).unwrap().total())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, rate_study, lemma_suite, kuznetsov_deltas);
criterion_main!(benches);
