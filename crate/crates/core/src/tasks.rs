//! Query datasets for the four reasoning tasks.
//!
//! Tail-entity and relation prediction queries come from masking one element
//! of sampled graph triples. Relation extraction and contextual path
//! generation queries are read from a JSON Lines task file, one record per
//! line:
//!
//! ```text
//! {"id":"re-playtone","kind":"RelationExtraction","head":"dbr:Playtone","tail":"dbr:Tom_Hanks",
//!  "context":"Playtone is ...","ground_truth":"dbo:founder"}
//! ```
//!
//! `ground_truth` is an entity IRI (tail prediction), a relation IRI
//! (relation prediction, relation extraction) or a rendered path
//! (contextual path generation). Optional fields: `relation`,
//! `context`, `head_aliases`, `tail_aliases` and `document`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hallucination::check_path;
use crate::iri::{Iri, IriKind};
use crate::kg::{KnowledgeGraph, Ontology, Triple};
use crate::path::{parse_path, render_path, KgPath, ParseOutcome};
use crate::rng::Sampler;

pub const MIN_CPG_HOPS: usize = 2;
pub const MAX_CPG_HOPS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    TailPrediction,
    RelationPrediction,
    RelationExtraction,
    ContextualPathGeneration,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::TailPrediction,
        TaskKind::RelationPrediction,
        TaskKind::RelationExtraction,
        TaskKind::ContextualPathGeneration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::TailPrediction => "TailPrediction",
            TaskKind::RelationPrediction => "RelationPrediction",
            TaskKind::RelationExtraction => "RelationExtraction",
            TaskKind::ContextualPathGeneration => "ContextualPathGeneration",
        }
    }

    /// Short name used in file names and report rows.
    pub fn short_name(self) -> &'static str {
        match self {
            TaskKind::TailPrediction => "tail",
            TaskKind::RelationPrediction => "relation",
            TaskKind::RelationExtraction => "re",
            TaskKind::ContextualPathGeneration => "cpg",
        }
    }

    pub fn is_path_task(self) -> bool {
        self == TaskKind::ContextualPathGeneration
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundTruth {
    Entity(Iri),
    Relation(Iri),
    Path(KgPath),
}

impl GroundTruth {
    pub fn render(&self) -> String {
        match self {
            GroundTruth::Entity(iri) | GroundTruth::Relation(iri) => iri.to_string(),
            GroundTruth::Path(path) => render_path(path),
        }
    }

    pub fn path(&self) -> Option<&KgPath> {
        match self {
            GroundTruth::Path(path) => Some(path),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    pub kind: TaskKind,
    pub head: Iri,
    pub tail: Option<Iri>,
    pub relation: Option<Iri>,
    pub context: Option<String>,
    pub ground_truth: GroundTruth,
    pub head_aliases: Vec<String>,
    pub tail_aliases: Vec<String>,
    pub document: Option<String>,
}

impl Query {
    /// Name used for the head entity when talking about it in prose.
    pub fn head_surface(&self) -> String {
        self.head_aliases
            .first()
            .cloned()
            .unwrap_or_else(|| self.head.surface_form())
    }

    pub fn tail_surface(&self) -> Option<String> {
        let tail = self.tail.as_ref()?;
        Some(
            self.tail_aliases
                .first()
                .cloned()
                .unwrap_or_else(|| tail.surface_form()),
        )
    }

    pub fn to_record(&self) -> TaskRecord {
        TaskRecord {
            id: self.id.clone(),
            kind: self.kind,
            head: self.head.to_string(),
            tail: self.tail.as_ref().map(Iri::to_string),
            relation: self.relation.as_ref().map(Iri::to_string),
            context: self.context.clone(),
            ground_truth: self.ground_truth.render(),
            head_aliases: self.head_aliases.clone(),
            tail_aliases: self.tail_aliases.clone(),
            document: self.document.clone(),
        }
    }
}

/// One line of a task file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: String,
    pub kind: TaskKind,
    pub head: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub ground_truth: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub head_aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail_aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub id: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {} (line {}): {}", self.id, self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedTasks {
    pub queries: Vec<Query>,
    pub rejected: Vec<RecordError>,
}

/// Draws `n` distinct triples. Triples are ordered canonically before
/// sampling, so the result depends only on graph contents and seed.
pub fn sample_triples(graph: &KnowledgeGraph, n: usize, seed: u64) -> Result<Vec<Triple>> {
    let all: Vec<&Triple> = graph.triples().collect();
    if n > all.len() {
        return Err(Error::InvalidInput(format!(
            "cannot sample {n} triples from a graph of {}",
            all.len()
        )));
    }
    let picks = Sampler::new(seed).choose_indices(all.len(), n);
    Ok(picks.into_iter().map(|i| all[i].clone()).collect())
}

fn query_id(kind: TaskKind, triple: &Triple) -> String {
    let mut hasher = Sha256::new();
    hasher.update(kind.as_str());
    for part in [&triple.head, &triple.relation, &triple.tail] {
        hasher.update(b"\t");
        hasher.update(part.as_str());
    }
    let digest = hex::encode(hasher.finalize());
    format!("{}-{}", kind.short_name(), &digest[..12])
}

pub fn make_masked_queries(triples: &[Triple], kind: TaskKind) -> Result<Vec<Query>> {
    let masked = |triple: &Triple| match kind {
        TaskKind::TailPrediction => Ok(Query {
            id: query_id(kind, triple),
            kind,
            head: triple.head.clone(),
            tail: None,
            relation: Some(triple.relation.clone()),
            context: None,
            ground_truth: GroundTruth::Entity(triple.tail.clone()),
            head_aliases: Vec::new(),
            tail_aliases: Vec::new(),
            document: None,
        }),
        TaskKind::RelationPrediction => Ok(Query {
            id: query_id(kind, triple),
            kind,
            head: triple.head.clone(),
            tail: Some(triple.tail.clone()),
            relation: None,
            context: None,
            ground_truth: GroundTruth::Relation(triple.relation.clone()),
            head_aliases: Vec::new(),
            tail_aliases: Vec::new(),
            document: None,
        }),
        other => Err(Error::InvalidInput(format!(
            "{other} queries are not built by masking"
        ))),
    };
    triples.iter().map(masked).collect()
}

pub fn read_task_records(path: &Path) -> Result<Vec<(usize, TaskRecord)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_task_records(&text, path)
}

pub fn parse_task_records(text: &str, origin: &Path) -> Result<Vec<(usize, TaskRecord)>> {
    let mut out = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TaskRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: index + 1,
            message: e.to_string(),
        })?;
        out.push((index + 1, record));
    }
    Ok(out)
}

pub fn write_tasks(path: &Path, queries: &[Query]) -> Result<()> {
    let mut buffer = Vec::new();
    for query in queries {
        serde_json::to_writer(&mut buffer, &query.to_record())?;
        buffer.push(b'\n');
    }
    crate::llm::write_atomic(path, &buffer)
}

/// Loads any task file, validating each record against the graph and
/// ontology. Invalid records are reported, not loaded.
pub fn load_tasks(path: &Path, graph: &KnowledgeGraph, ontology: &Ontology) -> Result<LoadedTasks> {
    let records = read_task_records(path)?;
    Ok(validate_records(records, graph, ontology))
}

/// Loads relation-extraction and path-generation records.
pub fn load_contextual_dataset(path: &Path, graph: &KnowledgeGraph, ontology: &Ontology) -> Result<LoadedTasks> {
    let mut loaded = load_tasks(path, graph, ontology)?;
    let mut kept = Vec::new();
    for query in loaded.queries {
        if matches!(
            query.kind,
            TaskKind::RelationExtraction | TaskKind::ContextualPathGeneration
        ) {
            kept.push(query);
        } else {
            loaded.rejected.push(RecordError {
                id: query.id.clone(),
                line: 0,
                message: format!("{} is not a contextual task", query.kind),
            });
        }
    }
    loaded.queries = kept;
    Ok(loaded)
}

pub fn validate_records(
    records: Vec<(usize, TaskRecord)>,
    graph: &KnowledgeGraph,
    ontology: &Ontology,
) -> LoadedTasks {
    let mut loaded = LoadedTasks::default();
    let mut seen = BTreeMap::new();
    for (line, record) in records {
        let id = record.id.clone();
        if let Some(first) = seen.insert(id.clone(), line) {
            loaded.rejected.push(RecordError {
                id,
                line,
                message: format!("duplicate id (first seen on line {first})"),
            });
            continue;
        }
        match validate_record(record, graph, ontology) {
            Ok(query) => loaded.queries.push(query),
            Err(message) => loaded.rejected.push(RecordError { id, line, message }),
        }
    }
    loaded
}

fn iri_of(text: &str, kind: IriKind, field: &str) -> std::result::Result<Iri, String> {
    Iri::parse_kind(text.trim(), kind).map_err(|e| format!("{field}: {e}"))
}

fn mentions(context: &str, aliases: &[String]) -> bool {
    let haystack = context.to_lowercase();
    aliases
        .iter()
        .any(|alias| !alias.trim().is_empty() && haystack.contains(&alias.to_lowercase()))
}

fn validate_record(
    record: TaskRecord,
    graph: &KnowledgeGraph,
    ontology: &Ontology,
) -> std::result::Result<Query, String> {
    let head = iri_of(&record.head, IriKind::Entity, "head")?;
    let tail = record
        .tail
        .as_deref()
        .map(|t| iri_of(t, IriKind::Entity, "tail"))
        .transpose()?;
    let relation = record
        .relation
        .as_deref()
        .map(|r| iri_of(r, IriKind::Relation, "relation"))
        .transpose()?;
    let context = record.context.filter(|c| !c.trim().is_empty());

    let ground_truth = match record.kind {
        TaskKind::TailPrediction => {
            if relation.is_none() || tail.is_some() {
                return Err("tail prediction needs a relation and no tail".into());
            }
            GroundTruth::Entity(iri_of(&record.ground_truth, IriKind::Entity, "ground_truth")?)
        }
        TaskKind::RelationPrediction => {
            if tail.is_none() || relation.is_some() {
                return Err("relation prediction needs a tail and no relation".into());
            }
            GroundTruth::Relation(iri_of(&record.ground_truth, IriKind::Relation, "ground_truth")?)
        }
        TaskKind::RelationExtraction => {
            let (Some(tail), Some(context)) = (&tail, &context) else {
                return Err("relation extraction needs a tail and a context".into());
            };
            if relation.is_some() {
                return Err("relation extraction must not carry a relation".into());
            }
            let parts: Vec<&str> = record
                .ground_truth
                .split(|c: char| c == ',' || c == '|' || c.is_whitespace())
                .filter(|p| !p.is_empty())
                .collect();
            if parts.len() != 1 {
                return Err(format!(
                    "ground-truth relation is not unique: {:?}",
                    record.ground_truth
                ));
            }
            let head_aliases = aliases_or_default(&record.head_aliases, &head);
            let tail_aliases = aliases_or_default(&record.tail_aliases, tail);
            if !mentions(context, &head_aliases) {
                return Err(format!("head entity {head} is not mentioned in the context"));
            }
            if !mentions(context, &tail_aliases) {
                return Err(format!("tail entity {tail} is not mentioned in the context"));
            }
            GroundTruth::Relation(iri_of(parts[0], IriKind::Relation, "ground_truth")?)
        }
        TaskKind::ContextualPathGeneration => {
            let (Some(tail), Some(_)) = (&tail, &context) else {
                return Err("path generation needs a tail and a context".into());
            };
            if relation.is_some() {
                return Err("path generation must not carry a relation".into());
            }
            let path = match parse_path(&record.ground_truth) {
                ParseOutcome::WellFormed(path) => path,
                other => return Err(format!("ground-truth path is {other}")),
            };
            let hops = path.hop_count();
            if !(MIN_CPG_HOPS..=MAX_CPG_HOPS).contains(&hops) {
                return Err(format!(
                    "ground-truth path has {hops} hops, expected {MIN_CPG_HOPS} to {MAX_CPG_HOPS}"
                ));
            }
            if path.head() != &head || path.tail() != tail {
                return Err("ground-truth path must run from head to tail".into());
            }
            let verdicts = check_path(ontology, graph, &path).map_err(|e| e.to_string())?;
            if let Some(bad) = verdicts.iter().find(|v| v.verdict.is_ontology_hallucination()) {
                return Err(format!(
                    "ground-truth hop {:?} is ontology-invalid: {}",
                    bad.triple, bad.verdict
                ));
            }
            GroundTruth::Path(path)
        }
    };

    Ok(Query {
        id: record.id,
        kind: record.kind,
        head,
        tail,
        relation,
        context,
        ground_truth,
        head_aliases: record.head_aliases,
        tail_aliases: record.tail_aliases,
        document: record.document,
    })
}

fn aliases_or_default(aliases: &[String], iri: &Iri) -> Vec<String> {
    if aliases.is_empty() {
        vec![iri.surface_form()]
    } else {
        aliases.to_vec()
    }
}

/// Keeps at most `per_document` queries for each context document, choosing
/// with a seeded sampler when a document has more. Queries without a
/// document id are always kept. Original order is preserved.
pub fn sample_per_document(queries: &[Query], per_document: usize, seed: u64) -> Vec<Query> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, query) in queries.iter().enumerate() {
        if let Some(doc) = &query.document {
            groups.entry(doc.as_str()).or_default().push(i);
        }
    }
    let mut sampler = Sampler::new(seed);
    let mut keep = vec![true; queries.len()];
    for members in groups.values() {
        if members.len() <= per_document {
            continue;
        }
        for &i in members {
            keep[i] = false;
        }
        for pick in sampler.choose_indices(members.len(), per_document) {
            keep[members[pick]] = true;
        }
    }
    queries
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(q, _)| q.clone())
        .collect()
}

/// Writes the triples as a triples file (for sampled subsets).
pub fn write_triples<W: Write>(mut out: W, triples: &[Triple]) -> std::io::Result<()> {
    for triple in triples {
        writeln!(out, "{triple}")?;
    }
    Ok(())
}
