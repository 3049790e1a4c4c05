use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use seamforge_bench::{charts, workloads};
use seamforge_core::atlas::{
    compute_metrics, flatten_chart, pack_charts, Flattener, MetricsConfig, PackConfig, UvChart,
};
use seamforge_core::seams::chains_to_edges;

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("atlas");
    g.sample_size(20);
    for w in &workloads() {
        let charts = charts(w);
        for method in [Flattener::Tutte, Flattener::Lscm] {
            g.bench_function(BenchmarkId::new(format!("flatten_{method}"), w.name), |b| {
                b.iter(|| {
                    charts
                        .iter()
                        .map(|c| flatten_chart(c, method).unwrap())
                        .collect::<Vec<_>>()
                })
            });
        }
        let uvs: Vec<UvChart> = charts
            .iter()
            .map(|c| flatten_chart(c, Flattener::Tutte).unwrap())
            .collect();
        let packed = pack_charts(&charts, &uvs, &PackConfig::default()).unwrap();
        let seams = chains_to_edges(&w.chains).unwrap();
        g.bench_function(BenchmarkId::new("pack", w.name), |b| {
            b.iter(|| pack_charts(&charts, &uvs, &PackConfig::default()).unwrap())
        });
        g.bench_function(BenchmarkId::new("metrics", w.name), |b| {
            b.iter(|| compute_metrics(&w.mesh, &charts, &packed, &seams, &MetricsConfig::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
