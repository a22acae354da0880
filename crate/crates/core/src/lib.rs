//! Knowledge-graph reasoning toolkit for evaluating LLMs.
//!
//! The crate builds the four query datasets (tail-entity prediction,
//! relation prediction, contextual relation extraction and contextual path
//! generation), renders prompts for them, drives chat-completion endpoints
//! through a replayable cache, parses free-text answers into knowledge-graph
//! paths and scores runs with hard/soft accuracy, NGEO, %IF and %IV.

pub mod error;
pub mod eval;
pub mod hallucination;
pub mod iri;
pub mod kg;
pub mod llm;
pub mod metrics;
pub mod path;
pub mod prompting;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
pub use hallucination::{check_ontology, path_invalid_fraction, ConstraintKind, RelationVerdict, Verdict};
pub use iri::{Iri, IriKind};
pub use kg::{load_snapshot, KnowledgeGraph, Ontology, Snapshot, Triple};
pub use metrics::{geo, ngeo, EditCostModel, LabelStore, MetricReport};
pub use path::{extract_paths, judge_generation, parse_path, render_path, KgPath, ParseOutcome, ReasonCode};
pub use prompting::{Strategy, TemplateSet};
pub use tasks::{GroundTruth, Query, TaskKind};
