use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use forge_bench::sites;
use forge_core::jumpkernel::analyze_site;
use forge_core::Rational;

fn solve_sites(c: &mut Criterion) {
    let mut group = c.benchmark_group("site solve");
    for d in [1, 2, 4] {
        let exact = sites::<Rational>(1, 64, d);
        let float = sites::<f64>(1, 64, d);
        group.bench_with_input(BenchmarkId::new("exact", d), &exact, |b, s| b.iter(|| s.iter().map(analyze_site).count()));
        group.bench_with_input(BenchmarkId::new("float", d), &float, |b, s| b.iter(|| s.iter().map(analyze_site).count()));
    }
    group.finish();
}

criterion_group!(benches, solve_sites);
criterion_main!(benches);
