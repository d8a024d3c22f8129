use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use majlab_bench::{fast_sampler_checksum, laguerre_tridiagonal, simplex_pair};
use majlab_core::eigensolve::tridiagonal_eigenvalues;
use majlab_core::ensembles::{wishart_spectrum_dense, wishart_spectrum_fast};
use majlab_core::limitlaws::{big_gamma, PrefactorMode};
use majlab_core::majorization::{tails_dominated, vidal_pi};
use majlab_core::rng::derive_substream;
use majlab_core::{EnsembleParams, TestFunction};
use std::hint::black_box;

fn ql(c: &mut Criterion) {
    let mut g = c.benchmark_group("tridiagonal_ql");
    for n in [64usize, 256, 1024] {
        let t = laguerre_tridiagonal(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| {
            b.iter(|| tridiagonal_eigenvalues(black_box(t), f64::EPSILON).unwrap())
        });
    }
    g.finish();
}

fn samplers(c: &mut Criterion) {
    let mut g = c.benchmark_group("wishart");
    for n in [16usize, 64, 128] {
        let p = EnsembleParams::new(n, n).unwrap();
        let mut i = 0u64;
        g.bench_with_input(BenchmarkId::new("fast", n), &p, |b, &p| {
            b.iter(|| {
                i += 1;
                wishart_spectrum_fast(p, &mut derive_substream(2, i)).unwrap()
            })
        });
        if n <= 64 {
            g.bench_with_input(BenchmarkId::new("dense", n), &p, |b, &p| {
                b.iter(|| {
                    i += 1;
                    wishart_spectrum_dense(p, &mut derive_substream(3, i)).unwrap()
                })
            });
        }
    }
    g.bench_function("fast_batch_32x64_x100", |b| b.iter(|| fast_sampler_checksum(32, 64, 100, 4)));
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("big_gamma");
    g.sample_size(10);
    for k in [10u32, 200, 400] {
        let f = TestFunction::monomial(k);
        let nodes = majlab_core::limitlaws::recommended_nodes(k);
        g.bench_with_input(BenchmarkId::from_parameter(k), &f, |b, f| {
            b.iter(|| big_gamma(f, f, nodes, PrefactorMode::AsWritten).unwrap())
        });
    }
    g.finish();
}

fn uniform_decay(c: &mut Criterion) {
    let mut g = c.benchmark_group("uniform_dominance");
    for n in [128usize, 1024, 8192] {
        let (x, y) = simplex_pair(n, 5);
        g.bench_with_input(BenchmarkId::new("tails", n), &(x.clone(), y.clone()), |b, (x, y)| {
            b.iter(|| tails_dominated(x, y, 0.0).unwrap().dominated)
        });
        g.bench_with_input(BenchmarkId::new("pi", n), &(x, y), |b, (x, y)| b.iter(|| vidal_pi(x, y).unwrap()));
        let mut i = 0u64;
        g.bench_with_input(BenchmarkId::new("sample_pair", n), &n, |b, &n| {
            b.iter(|| {
                i += 1;
                simplex_pair(n, i)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, ql, samplers, quadrature, uniform_decay);
criterion_main!(benches);
