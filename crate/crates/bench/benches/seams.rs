use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use seamforge_bench::workloads;
use seamforge_core::order::canonical_order;
use seamforge_core::seams::{chains_to_edges, detokenize, tokenize, trace_chains};
use seamforge_core::traversal::{decode, DecodeConfig, HeuristicScorer};

fn bench(c: &mut Criterion) {
    let loads = workloads();
    let mut g = c.benchmark_group("seams");
    for w in &loads {
        let edges = chains_to_edges(&w.chains).unwrap();
        g.bench_with_input(BenchmarkId::new("trace", w.name), &edges, |b, e| {
            b.iter(|| trace_chains(e))
        });
        let seq = tokenize(&w.chains);
        g.bench_with_input(BenchmarkId::new("detokenize", w.name), &seq, |b, s| {
            b.iter(|| detokenize(s, &w.adjacency).unwrap())
        });
        g.bench_function(BenchmarkId::new("canonical_order", w.name), |b| {
            b.iter(|| canonical_order(&w.mesh, &w.adjacency, &w.chains))
        });
        g.bench_function(BenchmarkId::new("heuristic_decode", w.name), |b| {
            let cfg = DecodeConfig::default();
            b.iter(|| {
                let mut s = HeuristicScorer::new(&w.mesh, &w.adjacency);
                decode(&w.mesh, &w.adjacency, &mut s, &cfg).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
