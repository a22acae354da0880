//! Content and ontology hallucination checks for generated triples.
//!
//! An ontology hallucination is a triple whose relation declares a domain
//! (range) that no type of the head (tail) falls under. Anything else that is
//! missing from the graph is only a content *suspect*: the graph is
//! incomplete, so absence is not proof of a false statement. Suspects become
//! confirmed hallucinations once a human label says so.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iri::{Iri, IriKind};
use crate::kg::{KnowledgeGraph, Ontology, Triple};
use crate::metrics::FactLabel;
use crate::path::KgPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Domain,
    Range,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Valid,
    OntologyHallucination {
        violated: ConstraintKind,
        expected: Iri,
        found: BTreeSet<Iri>,
    },
    ContentSuspect,
    ContentHallucinationConfirmed,
}

impl Verdict {
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Valid => "Valid",
            Verdict::OntologyHallucination { .. } => "OntologyHallucination",
            Verdict::ContentSuspect => "ContentSuspect",
            Verdict::ContentHallucinationConfirmed => "ContentHallucinationConfirmed",
        }
    }

    pub fn is_ontology_hallucination(&self) -> bool {
        matches!(self, Verdict::OntologyHallucination { .. })
    }

    /// Resolves a content suspect with a human factuality label.
    pub fn merge_label(self, label: FactLabel) -> Verdict {
        match (self, label) {
            (Verdict::ContentSuspect, FactLabel::IncorrectFact) => {
                Verdict::ContentHallucinationConfirmed
            }
            (Verdict::ContentSuspect, FactLabel::CorrectFact) => Verdict::Valid,
            (other, _) => other,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::OntologyHallucination {
                violated,
                expected,
                found,
            } => {
                let found: Vec<&str> = found.iter().map(Iri::as_str).collect();
                write!(f, "OntologyHallucination({violated:?}, expected {expected}, found {{{}}})", found.join(", "))
            }
            other => f.write_str(other.tag()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationVerdict {
    pub triple: Triple,
    pub verdict: Verdict,
}

/// Classifies one generated triple.
///
/// Relations without a declared domain or range are unconstrained on that
/// side, and so are entities with no recorded type.
pub fn check_ontology(ontology: &Ontology, graph: &KnowledgeGraph, triple: &Triple) -> Result<RelationVerdict> {
    triple.head.expect_kind(IriKind::Entity)?;
    triple.relation.expect_kind(IriKind::Relation)?;
    triple.tail.expect_kind(IriKind::Entity)?;

    let sides = [
        (ConstraintKind::Domain, ontology.domain(&triple.relation), &triple.head),
        (ConstraintKind::Range, ontology.range(&triple.relation), &triple.tail),
    ];
    for (violated, constraint, entity) in sides {
        let Some(expected) = constraint else { continue };
        let found = ontology.type_set(entity);
        if found.is_empty() {
            continue;
        }
        let mut satisfied = false;
        for class in &found {
            if ontology.is_subclass_or_equal(class, expected)? {
                satisfied = true;
                break;
            }
        }
        if !satisfied {
            return Ok(RelationVerdict {
                triple: triple.clone(),
                verdict: Verdict::OntologyHallucination {
                    violated,
                    expected: expected.clone(),
                    found,
                },
            });
        }
    }
    let verdict = if graph.has_triple(triple) {
        Verdict::Valid
    } else {
        Verdict::ContentSuspect
    };
    Ok(RelationVerdict {
        triple: triple.clone(),
        verdict,
    })
}

/// Verdict for every hop of a path.
///
/// A path may walk an edge against its stored direction. A hop whose written
/// triple is absent but whose reverse is stored is checked as the stored
/// triple; every other hop is checked as written.
pub fn check_path(ontology: &Ontology, graph: &KnowledgeGraph, path: &KgPath) -> Result<Vec<RelationVerdict>> {
    path.hops()
        .map(|hop| {
            let reversed = Triple {
                head: hop.tail.clone(),
                relation: hop.relation.clone(),
                tail: hop.head.clone(),
            };
            if !graph.has_triple(&hop) && graph.has_triple(&reversed) {
                check_ontology(ontology, graph, &reversed)
            } else {
                check_ontology(ontology, graph, &hop)
            }
        })
        .collect()
}

/// Share of hops that are ontology hallucinations.
pub fn path_invalid_fraction(ontology: &Ontology, graph: &KnowledgeGraph, path: &KgPath) -> Result<f64> {
    if path.hop_count() == 0 {
        return Err(Error::InvalidInput(
            "invalid-relation fraction is undefined for a zero-hop path".into(),
        ));
    }
    let verdicts = check_path(ontology, graph, path)?;
    Ok(invalid_fraction(&verdicts))
}

pub fn invalid_fraction(verdicts: &[RelationVerdict]) -> f64 {
    if verdicts.is_empty() {
        return 0.0;
    }
    let invalid = verdicts
        .iter()
        .filter(|v| v.verdict.is_ontology_hallucination())
        .count();
    invalid as f64 / verdicts.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_ontology;
    use crate::path::{parse_path, ParseOutcome};
    use std::path::Path;

    const ONTOLOGY: &str = "\
owl:Thing rdf:type owl:Class
dbo:Location rdfs:subClassOf owl:Thing
dbo:Settlement rdfs:subClassOf dbo:Location
dbo:City rdfs:subClassOf dbo:Settlement
dbo:Person rdfs:subClassOf owl:Thing
dbo:location rdfs:range dbo:Location
dbo:spouse rdfs:domain dbo:Person
dbo:spouse rdfs:range dbo:Person
dbr:Reading,_Berkshire rdf:type dbo:City
dbr:Jamie_Foxx rdf:type dbo:Person
dbr:Kate_Winslet rdf:type dbo:Person
dbr:Sam_Mendes rdf:type dbo:Person
";

    fn fixture() -> (Ontology, KnowledgeGraph) {
        let o = parse_ontology(ONTOLOGY, Path::new("o")).unwrap();
        let g = KnowledgeGraph::from_triples([
            Triple::parse("dbr:Kate_Winslet", "dbo:spouse", "dbr:Sam_Mendes").unwrap(),
            Triple::parse("dbr:Sam_Mendes", "dbo:birthPlace", "dbr:Reading,_Berkshire").unwrap(),
        ]);
        (o, g)
    }

    #[test]
    fn location_range_violation() {
        let (o, g) = fixture();
        let t = Triple::parse("dbr:Reading,_Berkshire", "dbo:location", "dbr:Jamie_Foxx").unwrap();
        let v = check_ontology(&o, &g, &t).unwrap();
        assert_eq!(
            v.verdict,
            Verdict::OntologyHallucination {
                violated: ConstraintKind::Range,
                expected: Iri::parse("dbo:Location").unwrap(),
                found: BTreeSet::from([Iri::parse("dbo:Person").unwrap()]),
            }
        );
    }

    #[test]
    fn spouse_is_content_suspect() {
        let (o, g) = fixture();
        let t = Triple::parse("dbr:Kate_Winslet", "dbo:spouse", "dbr:Jamie_Foxx").unwrap();
        assert_eq!(check_ontology(&o, &g, &t).unwrap().verdict, Verdict::ContentSuspect);
    }

    #[test]
    fn existing_triple_is_valid() {
        let (o, g) = fixture();
        let t = Triple::parse("dbr:Kate_Winslet", "dbo:spouse", "dbr:Sam_Mendes").unwrap();
        assert_eq!(check_ontology(&o, &g, &t).unwrap().verdict, Verdict::Valid);
    }

    #[test]
    fn wrong_kind_is_an_error() {
        let (o, g) = fixture();
        let t = Triple {
            head: Iri::parse("dbo:City").unwrap(),
            relation: Iri::parse("dbo:location").unwrap(),
            tail: Iri::parse("dbr:Jamie_Foxx").unwrap(),
        };
        assert!(check_ontology(&o, &g, &t).is_err());
    }

    fn path(text: &str) -> KgPath {
        match parse_path(text) {
            ParseOutcome::WellFormed(p) => p,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_fraction_examples() {
        let (o, g) = fixture();
        let half = path("dbr:Kate_Winslet, dbo:spouse, dbr:Sam_Mendes, dbo:location, dbr:Jamie_Foxx");
        assert_eq!(path_invalid_fraction(&o, &g, &half).unwrap(), 0.5);
        let clean = path("dbr:Kate_Winslet, dbo:spouse, dbr:Sam_Mendes, dbo:birthPlace, dbr:Reading,_Berkshire");
        assert_eq!(path_invalid_fraction(&o, &g, &clean).unwrap(), 0.0);
        let all = path("dbr:Reading,_Berkshire, dbo:spouse, dbr:Jamie_Foxx, dbo:location, dbr:Kate_Winslet");
        assert_eq!(path_invalid_fraction(&o, &g, &all).unwrap(), 1.0);
        let zero = path("dbr:Kate_Winslet");
        assert!(path_invalid_fraction(&o, &g, &zero).is_err());
    }

    #[test]
    fn reversed_stored_hop_is_valid() {
        let (o, g) = fixture();
        let p = path("dbr:Sam_Mendes, dbo:spouse, dbr:Kate_Winslet");
        let verdicts = check_path(&o, &g, &p).unwrap();
        assert_eq!(verdicts[0].verdict, Verdict::Valid);
        assert_eq!(verdicts[0].triple.head.as_str(), "dbr:Kate_Winslet");
        let p = path("dbr:Reading,_Berkshire, dbo:birthPlace, dbr:Sam_Mendes");
        assert_eq!(check_path(&o, &g, &p).unwrap()[0].verdict, Verdict::Valid);
    }

    #[test]
    fn labels_resolve_suspects_only() {
        assert_eq!(
            Verdict::ContentSuspect.merge_label(FactLabel::IncorrectFact),
            Verdict::ContentHallucinationConfirmed
        );
        assert_eq!(Verdict::ContentSuspect.merge_label(FactLabel::CorrectFact), Verdict::Valid);
        assert_eq!(Verdict::Valid.merge_label(FactLabel::IncorrectFact), Verdict::Valid);
    }

    #[test]
    fn untyped_entities_are_unconstrained() {
        let (o, g) = fixture();
        let t = Triple::parse("dbr:Nowhere", "dbo:location", "dbr:Somewhere").unwrap();
        assert_eq!(check_ontology(&o, &g, &t).unwrap().verdict, Verdict::ContentSuspect);
    }
}
