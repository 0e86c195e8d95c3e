use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sextic_bench::{exp_quartic, five_point};
use sextic_core::sampler::enumerate_exact;
use sextic_core::{ChainState, Interaction};

fn gibbs_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs_sweep");
    for (name, m) in [("five_point", five_point()), ("exp_quartic", exp_quartic())] {
        for n in [100usize, 1000, 10_000] {
            let mut chain = ChainState::new(&m, n, 1).unwrap();
            group.throughput(Throughput::Elements(n as u64));
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| b.iter(|| chain.sweep(black_box(&m))));
        }
    }
    group.finish();
}

fn exact_enumeration(c: &mut Criterion) {
    let m = five_point();
    c.bench_function("enumerate_exact/five_point/n6", |b| {
        b.iter(|| enumerate_exact(black_box(&m), 6, Interaction::Candidate).unwrap())
    });
}

criterion_group!(benches, gibbs_sweep, exact_enumeration);
criterion_main!(benches);
