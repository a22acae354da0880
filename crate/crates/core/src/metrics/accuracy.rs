use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hallucination::check_ontology;
use crate::iri::{Iri, IriKind};
use crate::kg::{KnowledgeGraph, Ontology, Triple};
use crate::path::mentioned_iris;
use crate::tasks::{GroundTruth, Query, TaskKind};

use super::labels::{FactLabel, LabelStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SoftOutcome {
    True,
    False,
    Unresolved,
}

/// Scoring of one tail, relation or relation-extraction answer, before labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerEvaluation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Iri>,
    /// Key under which a human label for this answer is stored.
    pub canonical: String,
    pub hard: bool,
    pub ontology_invalid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Picks the answer IRI out of a raw generation: the first entity other than
/// the query head for tail prediction, the first `dbo:`/`dbp:` relation
/// otherwise.
pub fn parse_answer(query: &Query, text: &str) -> Option<Iri> {
    let mentioned = mentioned_iris(text);
    match query.kind {
        TaskKind::TailPrediction => mentioned
            .into_iter()
            .find(|iri| iri.kind() == IriKind::Entity && *iri != query.head),
        TaskKind::RelationPrediction | TaskKind::RelationExtraction => mentioned
            .into_iter()
            .find(|iri| iri.kind() == IriKind::Relation && matches!(iri.prefix(), "dbo" | "dbp")),
        TaskKind::ContextualPathGeneration => None,
    }
}

/// The triple an answer asserts, if the query pins the other two positions.
fn asserted_triple(query: &Query, answer: &Iri) -> Option<Triple> {
    match query.kind {
        TaskKind::TailPrediction => Some(Triple {
            head: query.head.clone(),
            relation: query.relation.clone()?,
            tail: answer.clone(),
        }),
        TaskKind::RelationPrediction | TaskKind::RelationExtraction => Some(Triple {
            head: query.head.clone(),
            relation: answer.clone(),
            tail: query.tail.clone()?,
        }),
        TaskKind::ContextualPathGeneration => None,
    }
}

/// Exact-surface correctness. Tail and relation prediction accept any answer
/// completing a triple of the graph; relation extraction requires the one
/// relation the context supports.
pub fn hard_accuracy(graph: &KnowledgeGraph, query: &Query, answer: Option<&Iri>) -> bool {
    let Some(answer) = answer else { return false };
    match (query.kind, &query.ground_truth) {
        (TaskKind::RelationExtraction, GroundTruth::Relation(truth)) => answer == truth,
        (TaskKind::ContextualPathGeneration, _) => false,
        _ => asserted_triple(query, answer).is_some_and(|t| graph.has_triple(&t)),
    }
}

pub fn evaluate_answer(graph: &KnowledgeGraph, ontology: &Ontology, query: &Query, text: &str) -> Result<AnswerEvaluation> {
    let answer = parse_answer(query, text);
    let canonical = match &answer {
        Some(iri) => iri.to_string(),
        None => text.split_whitespace().collect::<Vec<_>>().join(" "),
    };
    let hard = hard_accuracy(graph, query, answer.as_ref());
    let mut ontology_invalid = false;
    let mut reason = None;
    match answer.as_ref().and_then(|a| asserted_triple(query, a)) {
        Some(triple) => {
            ontology_invalid = check_ontology(ontology, graph, &triple)?
                .verdict
                .is_ontology_hallucination();
        }
        None if answer.is_none() => reason = Some("no answer IRI found".to_string()),
        None => {}
    }
    Ok(AnswerEvaluation {
        answer,
        canonical,
        hard,
        ontology_invalid,
        reason,
    })
}

/// Hard accuracy or a CorrectFact label makes an answer soft-accurate; an
/// IncorrectFact label or an ontology violation makes it wrong. Anything else
/// waits for a label.
pub fn soft_accuracy(evaluation: &AnswerEvaluation, query_id: &str, labels: &LabelStore) -> SoftOutcome {
    if evaluation.hard {
        return SoftOutcome::True;
    }
    match labels.get(query_id, &evaluation.canonical) {
        Some(FactLabel::CorrectFact) => SoftOutcome::True,
        Some(FactLabel::IncorrectFact) => SoftOutcome::False,
        None if evaluation.ontology_invalid => SoftOutcome::False,
        None => SoftOutcome::Unresolved,
    }
}
