use criterion::{criterion_group, criterion_main, Criterion};
use forge_bench::scenario;
use forge_core::report::{analyze, AnalyzeOptions};
use forge_core::Rational;

fn full_analysis(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze");
    for name in ["b1.scenario", "b2n.scenario", "b2i.scenario"] {
        let exact = scenario::<Rational>(name);
        let float = scenario::<f64>(name);
        let opts = AnalyzeOptions::default();
        group.bench_function(format!("{name} exact"), |b| b.iter(|| analyze(&exact, &opts).unwrap()));
        group.bench_function(format!("{name} float"), |b| b.iter(|| analyze(&float, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, full_analysis);
criterion_main!(benches);
