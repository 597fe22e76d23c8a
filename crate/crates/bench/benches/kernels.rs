use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use fairmeasure::builtins;
use fairmeasure::chain::StepSampler;
use fairmeasure::exact::rat;
use fairmeasure::fair::{check_fair_on_cylinders, solve_stationary, solve_stationary_with, SolverOptions};
use fairmeasure::graph::{cut_and_paste, dendrite_example, refined_transition_matrix};
use fairmeasure::interval::transition_matrix;
use fairmeasure::recurrence::return_times;
use fairmeasure::{sample_backward, BackwardKernel, FairMeasure, IndexRange, StateId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kernel(name: &str) -> BackwardKernel {
    BackwardKernel::new(builtins::by_name(name).unwrap().rules).unwrap()
}

fn backward_steps(c: &mut Criterion) {
    const STEPS: u64 = 100_000;
    let mut g = c.benchmark_group("backward_steps");
    g.throughput(Throughput::Elements(STEPS));
    for name in ["unbiased-walk", "five-three", "origin-broadcast", "bruin-todd"] {
        let q = kernel(name);
        let start = builtins::by_name(name).unwrap().origin;
        g.bench_with_input(BenchmarkId::new("stepper", name), &q, |b, q| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let mut stepper = StepSampler::new(q);
                let mut s = start;
                for _ in 0..STEPS {
                    s = stepper.step(s, &mut rng).unwrap();
                }
                black_box(s)
            })
        });
        g.bench_with_input(BenchmarkId::new("path", name), &q, |b, q| {
            b.iter(|| black_box(sample_backward(q, start, STEPS as usize, 0).unwrap().len()))
        });
    }
    g.finish();
}

fn monte_carlo_returns(c: &mut Criterion) {
    let q = kernel("biased-walk");
    let mut g = c.benchmark_group("return_times");
    g.sample_size(10);
    g.bench_function("biased-walk 1e3 trials x 1e3 steps", |b| {
        b.iter(|| black_box(return_times(&q, StateId(0), 1_000, 1_000, 0).unwrap().len()))
    });
    g.finish();
}

fn stationary_solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_stationary");
    g.sample_size(10);
    for name in ["origin-broadcast", "bruin-todd"] {
        let q = kernel(name);
        g.bench_function(format!("{name} numeric"), |b| b.iter(|| black_box(solve_stationary(&q, SolverOptions::default()).unwrap())));
    }
    let b = builtins::by_name("origin-broadcast").unwrap();
    let q = BackwardKernel::new(b.rules.clone()).unwrap();
    g.bench_function("origin-broadcast closed form", |bch| {
        bch.iter(|| black_box(solve_stationary_with(&q, SolverOptions::default(), b.closed_form.as_ref()).unwrap()))
    });
    let refined = refined_transition_matrix(&dendrite_example(12, rat(1, 2)).unwrap(), None).unwrap();
    let q = BackwardKernel::new(refined).unwrap();
    g.bench_function("dendrite W=12 refined chain", |b| b.iter(|| black_box(solve_stationary(&q, SolverOptions::default()).unwrap())));
    g.finish();
}

fn exact_fairness(c: &mut Criterion) {
    let b = builtins::by_name("origin-broadcast").unwrap();
    let q = BackwardKernel::new(b.rules.clone()).unwrap();
    let pi = solve_stationary_with(&q, SolverOptions::default(), b.closed_form.as_ref()).unwrap();
    let mu = FairMeasure::new(pi, &q).unwrap();
    let mut g = c.benchmark_group("check_fair_on_cylinders");
    g.sample_size(10);
    for depth in [2, 3, 4] {
        g.bench_with_input(BenchmarkId::new("origin-broadcast", depth), &depth, |bch, &d| {
            bch.iter(|| black_box(check_fair_on_cylinders(&mu, &b.rules, d, IndexRange::new(0, 12)).unwrap()))
        });
    }
    g.finish();
}

fn interval_transition_matrix(c: &mut Criterion) {
    let model = cut_and_paste(&dendrite_example(12, rat(1, 2)).unwrap(), None).unwrap();
    let mut g = c.benchmark_group("transition_matrix");
    g.sample_size(10);
    g.bench_function("dendrite W=12 cut-and-paste map", |b| b.iter(|| black_box(transition_matrix(&model.interval_map).unwrap())));
    g.finish();
}

criterion_group!(benches, backward_steps, monte_carlo_returns, stationary_solver, exact_fairness, interval_transition_matrix);
criterion_main!(benches);
