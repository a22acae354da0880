use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kgreason::{extract_paths, geo, parse_path, EditCostModel, Iri, KgPath, KnowledgeGraph, ParseOutcome, Triple};

fn chain(prefix: &str, hops: usize) -> KgPath {
    let mut text = format!("dbr:{prefix}0");
    for i in 0..hops {
        text.push_str(&format!(", dbo:rel{}, dbr:{prefix}{}", i % 3, i + 1));
    }
    match parse_path(&text) {
        ParseOutcome::WellFormed(p) => p,
        other => panic!("{other:?}"),
    }
}

fn grid_graph(side: usize) -> KnowledgeGraph {
    let node = |r: usize, c: usize| format!("dbr:N_{r}_{c}");
    let mut triples = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                triples.push(Triple::parse(&node(r, c), "dbo:east", &node(r, c + 1)).unwrap());
            }
            if r + 1 < side {
                triples.push(Triple::parse(&node(r, c), "dbo:south", &node(r + 1, c)).unwrap());
            }
        }
    }
    KnowledgeGraph::from_triples(triples)
}

fn bench_geo(c: &mut Criterion) {
    let cost = EditCostModel::plain();
    let a = chain("A", 6);
    let b = chain("B", 6);
    c.bench_function("geo_6_hops", |bench| bench.iter(|| geo(Some(black_box(&a)), black_box(&b), &cost)));
}

fn bench_shortest_path(c: &mut Criterion) {
    let graph = grid_graph(30);
    let from = Iri::parse("dbr:N_0_0").unwrap();
    let to = Iri::parse("dbr:N_29_29").unwrap();
    c.bench_function("shortest_path_grid_30", |bench| {
        bench.iter(|| graph.shortest_path(black_box(&from), black_box(&to)).unwrap())
    });
}

fn bench_extract(c: &mut Criterion) {
    let text = format!(
        "Let's think step by step. The film stars the actor.\n\nAnswer: {}\n\nAlternatively: {}",
        kgreason::render_path(&chain("X", 4)),
        kgreason::render_path(&chain("Y", 3)).replace(", ", " - ")
    );
    c.bench_function("extract_paths", |bench| bench.iter(|| extract_paths(black_box(&text))));
}

criterion_group!(benches, bench_geo, bench_shortest_path, bench_extract);
criterion_main!(benches);
