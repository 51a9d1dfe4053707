use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hklab_core::*;

fn operator(m: usize, n: usize) -> DiscreteOperator {
    let spec = OperatorSpec::new(m, 1, Coefficient::Constant(1.0)).unwrap();
    DiscreteOperator::build(spec, Grid::new(Domain::unit_interval(), n).unwrap()).unwrap()
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigendecompose_lowest_10");
    group.sample_size(10);
    // 500 takes the dense route, the others the banded one
    for n in [500, 2000, 8000] {
        let op = operator(1, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &op, |b, op| {
            b.iter(|| eigendecompose(op, ModeCount::Lowest(10)).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let op = operator(1, 999);
    let ke = KernelEvaluator::for_min_time(&op, 1e-4).unwrap();
    let x = op.grid.center_node();
    c.bench_function("heat_kernel_diagonal_n999", |b| {
        b.iter(|| ke.diagonal(black_box(1e-3), x).unwrap())
    });
}

fn green(c: &mut Criterion) {
    let op = operator(2, 999);
    let x = op.grid.center_node();
    let fam = TestFunctionFamily::for_operator(&op).unwrap();
    c.bench_function("green_solve_beam_n999", |b| {
        b.iter(|| green_solve(&op, black_box(1e-4), &[x]).unwrap())
    });
    c.bench_function("certified_green_scan_beam_n999", |b| {
        b.iter(|| fam.green_lower_bound_discrete(&op, black_box(1e-4), x, true).unwrap())
    });
}

fn bootstrap(c: &mut Criterion) {
    let mut params = BoundParams::new(1, 1, BoundParams::default_eps(1, 1), 9.87).unwrap();
    params.c_upper = Some(1.0);
    params.c_upper_long = Some(1.0);
    let cfg = BootstrapConfig::default();
    c.bench_function("bootstrap_from_green", |b| {
        b.iter(|| bootstrap_from_green(black_box(0.1), &params, 0.5, 1e-3, &cfg).unwrap())
    });
}

criterion_group!(benches, spectrum, kernel, green, bootstrap);
criterion_main!(benches);
