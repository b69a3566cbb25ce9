use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mongeflow::asymptotic::{ma_residual, normalized_residual};
use mongeflow::calculus::{covariant_advection, grad, inverse_laplacian, HessianConvention};
use mongeflow::geodesic::EulerSolver;
use mongeflow::transport::{solve_transport, Density};
use mongeflow_bench::{band, cellular, stream, torus};

fn calculus(c: &mut Criterion) {
    let mut g = c.benchmark_group("calculus");
    for n in [64, 128] {
        let t = torus(n);
        let b = band(n);
        let (pt, pb) = (stream(&t), stream(&b));
        g.bench_with_input(BenchmarkId::new("grad_torus", n), &pt, |bn, f| bn.iter(|| grad(black_box(f))));
        g.bench_with_input(BenchmarkId::new("grad_band", n), &pb, |bn, f| bn.iter(|| grad(black_box(f))));
        let x = cellular(&t);
        g.bench_with_input(BenchmarkId::new("advection_torus", n), &x, |bn, x| {
            bn.iter(|| covariant_advection(black_box(x), x))
        });
        let rhs = mongeflow::calculus::laplacian(&pt);
        g.bench_with_input(BenchmarkId::new("poisson_torus", n), &rhs, |bn, f| {
            bn.iter(|| inverse_laplacian(black_box(f)).unwrap())
        });
    }
    g.finish();
}

fn monge_ampere(c: &mut Criterion) {
    let mut g = c.benchmark_group("monge_ampere");
    let b = band(48);
    let psi = stream(&b);
    g.bench_function("ma_residual_band_48", |bn| {
        bn.iter(|| ma_residual(black_box(&psi), HessianConvention::default()))
    });
    g.bench_function("normalized_residual_band_48", |bn| {
        bn.iter(|| normalized_residual(black_box(&psi), HessianConvention::default()).unwrap())
    });
    g.finish();
}

fn euler(c: &mut Criterion) {
    let mut g = c.benchmark_group("euler");
    let t = torus(64);
    let x0 = cellular(&t);
    g.bench_function("step_64", |bn| {
        let mut s = EulerSolver::new(&x0, true).unwrap();
        let dt = s.cfl_step();
        bn.iter(|| s.step(black_box(dt)).unwrap())
    });
    g.finish();
}

fn transport(c: &mut Criterion) {
    let mut g = c.benchmark_group("transport");
    g.sample_size(10);
    for n in [32, 64] {
        let t = torus(n);
        let m = Density::uniform(&t).unwrap();
        let target = Density::cosine(&t, 0.2, true).unwrap();
        g.bench_function(BenchmarkId::new("newton", n), |bn| {
            bn.iter(|| solve_transport(black_box(&m), &target, 1e-8, 30).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, calculus, monge_ampere, euler, transport);
criterion_main!(benches);
