#![allow(dead_code)]

use std::path::PathBuf;

use kgreason::tasks::load_contextual_dataset;
use kgreason::{load_snapshot, Query, Snapshot};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn snapshot() -> Snapshot {
    let dir = fixtures();
    load_snapshot(&dir.join("kg.nt"), &dir.join("ontology.nt")).unwrap()
}

pub fn contextual(snapshot: &Snapshot) -> Vec<Query> {
    let loaded = load_contextual_dataset(
        &fixtures().join("tasks/contextual.jsonl"),
        &snapshot.graph,
        &snapshot.ontology,
    )
    .unwrap();
    assert!(loaded.rejected.is_empty(), "{:?}", loaded.rejected);
    loaded.queries
}
