//! Knowledge-graph snapshot and ontology store.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iri::{Iri, IriKind};
use crate::path::KgPath;

pub const RDF_TYPE: &str = "rdf:type";
pub const RDFS_SUBCLASS_OF: &str = "rdfs:subClassOf";
pub const RDFS_SUBPROPERTY_OF: &str = "rdfs:subPropertyOf";
pub const RDFS_DOMAIN: &str = "rdfs:domain";
pub const RDFS_RANGE: &str = "rdfs:range";

const CLASS_MARKERS: &[&str] = &["owl:Class", "rdfs:Class"];
const PROPERTY_MARKERS: &[&str] = &["owl:ObjectProperty", "owl:DatatypeProperty", "rdf:Property"];

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: Iri,
    pub relation: Iri,
    pub tail: Iri,
}

impl Triple {
    pub fn new(head: Iri, relation: Iri, tail: Iri) -> Result<Self> {
        head.expect_kind(IriKind::Entity)?;
        relation.expect_kind(IriKind::Relation)?;
        tail.expect_kind(IriKind::Entity)?;
        Ok(Triple {
            head,
            relation,
            tail,
        })
    }

    pub fn parse(head: &str, relation: &str, tail: &str) -> Result<Self> {
        Triple::new(Iri::parse(head)?, Iri::parse(relation)?, Iri::parse(tail)?)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.head, self.relation, self.tail)
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} - {} - {}>", self.head, self.relation, self.tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Edge stored as `from relation to`.
    Forward,
    /// Edge stored as `to relation from`.
    Backward,
}

/// One entry of the undirected adjacency view.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Neighbor {
    pub relation: Iri,
    pub entity: Iri,
    pub direction: Direction,
}

/// A traversed edge in a path, keeping its stored orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathHop {
    pub from: Iri,
    pub relation: Iri,
    pub to: Iri,
    pub direction: Direction,
}

impl PathHop {
    pub fn stored_triple(&self) -> Triple {
        let (head, tail) = match self.direction {
            Direction::Forward => (self.from.clone(), self.to.clone()),
            Direction::Backward => (self.to.clone(), self.from.clone()),
        };
        Triple {
            head,
            relation: self.relation.clone(),
            tail,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    triples: BTreeSet<Triple>,
    by_head_relation: HashMap<(Iri, Iri), BTreeSet<Iri>>,
    by_pair: HashMap<(Iri, Iri), BTreeSet<Iri>>,
    adjacency: BTreeMap<Iri, BTreeSet<Neighbor>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut graph = Self::new();
        for triple in triples {
            graph.insert(triple);
        }
        graph
    }

    /// Returns false when the triple was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if self.triples.contains(&triple) {
            return false;
        }
        let Triple {
            head,
            relation,
            tail,
        } = &triple;
        self.by_head_relation
            .entry((head.clone(), relation.clone()))
            .or_default()
            .insert(tail.clone());
        self.by_pair
            .entry((head.clone(), tail.clone()))
            .or_default()
            .insert(relation.clone());
        self.adjacency.entry(head.clone()).or_default().insert(Neighbor {
            relation: relation.clone(),
            entity: tail.clone(),
            direction: Direction::Forward,
        });
        self.adjacency.entry(tail.clone()).or_default().insert(Neighbor {
            relation: relation.clone(),
            entity: head.clone(),
            direction: Direction::Backward,
        });
        self.triples.insert(triple);
        true
    }

    pub fn has_triple(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn entity_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Iri> {
        self.adjacency.keys()
    }

    pub fn contains_entity(&self, entity: &Iri) -> bool {
        self.adjacency.contains_key(entity)
    }

    pub fn relation_count(&self) -> usize {
        self.triples
            .iter()
            .map(|t| &t.relation)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn relations_between(&self, head: &Iri, tail: &Iri) -> BTreeSet<Iri> {
        self.by_pair
            .get(&(head.clone(), tail.clone()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn tails(&self, head: &Iri, relation: &Iri) -> BTreeSet<Iri> {
        self.by_head_relation
            .get(&(head.clone(), relation.clone()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn neighbors(&self, entity: &Iri) -> impl Iterator<Item = &Neighbor> {
        self.adjacency.get(entity).into_iter().flatten()
    }

    /// Minimum-hop path over the undirected view of the graph.
    pub fn shortest_path(&self, from: &Iri, to: &Iri) -> Result<KgPath> {
        let hops = self.shortest_path_hops(from, to)?;
        Ok(KgPath::from_hops(from.clone(), &hops))
    }

    /// Breadth-first search exploring neighbours in (relation, entity) order;
    /// the first discovery of each entity fixes its predecessor, so the
    /// result is deterministic.
    pub fn shortest_path_hops(&self, from: &Iri, to: &Iri) -> Result<Vec<PathHop>> {
        for entity in [from, to] {
            if !self.contains_entity(entity) {
                return Err(Error::UnknownEntity(entity.to_string()));
            }
        }
        if from == to {
            return Ok(Vec::new());
        }
        let mut parent: HashMap<&Iri, (&Iri, &Neighbor)> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        'search: while let Some(current) = queue.pop_front() {
            for neighbor in self.neighbors(current) {
                let next = &neighbor.entity;
                if next == from || parent.contains_key(next) {
                    continue;
                }
                parent.insert(next, (current, neighbor));
                if next == to {
                    break 'search;
                }
                queue.push_back(next);
            }
        }
        if !parent.contains_key(to) {
            return Err(Error::NoPath(from.to_string(), to.to_string()));
        }
        let mut hops = Vec::new();
        let mut cursor = to;
        while cursor != from {
            let (prev, edge) = parent[cursor];
            hops.push(PathHop {
                from: prev.clone(),
                relation: edge.relation.clone(),
                to: cursor.clone(),
                direction: edge.direction,
            });
            cursor = prev;
        }
        hops.reverse();
        Ok(hops)
    }
}

/// Class hierarchy, property hierarchy, domain/range constraints and entity types.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    classes: BTreeSet<Iri>,
    relations: BTreeSet<Iri>,
    subclass_of: BTreeMap<Iri, BTreeSet<Iri>>,
    subproperty_of: BTreeMap<Iri, BTreeSet<Iri>>,
    domain_of: BTreeMap<Iri, Iri>,
    range_of: BTreeMap<Iri, Iri>,
    types_of: BTreeMap<Iri, BTreeSet<Iri>>,
    // reflexive-transitive closure of subclass_of
    ancestors: BTreeMap<Iri, BTreeSet<Iri>>,
}

impl Ontology {
    pub fn builder() -> OntologyBuilder {
        OntologyBuilder::default()
    }

    pub fn classes(&self) -> impl Iterator<Item = &Iri> {
        self.classes.iter()
    }

    pub fn is_class(&self, class: &Iri) -> bool {
        self.classes.contains(class)
    }

    pub fn direct_superclasses(&self, class: &Iri) -> impl Iterator<Item = &Iri> {
        self.subclass_of.get(class).into_iter().flatten()
    }

    pub fn direct_superproperties(&self, relation: &Iri) -> impl Iterator<Item = &Iri> {
        self.subproperty_of.get(relation).into_iter().flatten()
    }

    pub fn domain(&self, relation: &Iri) -> Option<&Iri> {
        self.domain_of.get(relation)
    }

    pub fn range(&self, relation: &Iri) -> Option<&Iri> {
        self.range_of.get(relation)
    }

    pub fn types(&self, entity: &Iri) -> impl Iterator<Item = &Iri> {
        self.types_of.get(entity).into_iter().flatten()
    }

    pub fn type_set(&self, entity: &Iri) -> BTreeSet<Iri> {
        self.types(entity).cloned().collect()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn typed_entity_count(&self) -> usize {
        self.types_of.len()
    }

    pub fn is_subclass_or_equal(&self, sub: &Iri, sup: &Iri) -> Result<bool> {
        for class in [sub, sup] {
            if !self.classes.contains(class) {
                return Err(Error::Ontology(format!("undeclared class {class}")));
            }
        }
        Ok(self.ancestors[sub].contains(sup))
    }

    /// Types of `entity` that are not strict superclasses of another of its types.
    pub fn most_specific_types(&self, entity: &Iri) -> BTreeSet<Iri> {
        let types = self.type_set(entity);
        types
            .iter()
            .filter(|candidate| {
                !types
                    .iter()
                    .any(|other| other != *candidate && self.ancestors[other].contains(*candidate))
            })
            .cloned()
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct OntologyBuilder {
    classes: BTreeSet<Iri>,
    relations: BTreeSet<Iri>,
    subclass_of: BTreeMap<Iri, BTreeSet<Iri>>,
    subproperty_of: BTreeMap<Iri, BTreeSet<Iri>>,
    domain_of: BTreeMap<Iri, Iri>,
    range_of: BTreeMap<Iri, Iri>,
    types_of: BTreeMap<Iri, BTreeSet<Iri>>,
}

impl OntologyBuilder {
    pub fn class(&mut self, class: &Iri) -> Result<&mut Self> {
        class.expect_kind(IriKind::Class)?;
        self.classes.insert(class.clone());
        Ok(self)
    }

    pub fn relation(&mut self, relation: &Iri) -> Result<&mut Self> {
        relation.expect_kind(IriKind::Relation)?;
        self.relations.insert(relation.clone());
        Ok(self)
    }

    pub fn subclass(&mut self, sub: &Iri, sup: &Iri) -> Result<&mut Self> {
        self.class(sub)?.class(sup)?;
        self.subclass_of
            .entry(sub.clone())
            .or_default()
            .insert(sup.clone());
        Ok(self)
    }

    pub fn subproperty(&mut self, sub: &Iri, sup: &Iri) -> Result<&mut Self> {
        self.relation(sub)?.relation(sup)?;
        self.subproperty_of
            .entry(sub.clone())
            .or_default()
            .insert(sup.clone());
        Ok(self)
    }

    pub fn domain(&mut self, relation: &Iri, class: &Iri) -> Result<&mut Self> {
        Self::constrain(&mut self.domain_of, "domain", relation, class)?;
        self.relation(relation)
    }

    pub fn range(&mut self, relation: &Iri, class: &Iri) -> Result<&mut Self> {
        Self::constrain(&mut self.range_of, "range", relation, class)?;
        self.relation(relation)
    }

    pub fn typed(&mut self, entity: &Iri, class: &Iri) -> Result<&mut Self> {
        entity.expect_kind(IriKind::Entity)?;
        class.expect_kind(IriKind::Class)?;
        self.types_of
            .entry(entity.clone())
            .or_default()
            .insert(class.clone());
        Ok(self)
    }

    fn constrain(
        map: &mut BTreeMap<Iri, Iri>,
        what: &str,
        relation: &Iri,
        class: &Iri,
    ) -> Result<()> {
        relation.expect_kind(IriKind::Relation)?;
        class.expect_kind(IriKind::Class)?;
        match map.get(relation) {
            Some(existing) if existing != class => Err(Error::Ontology(format!(
                "conflicting {what} for {relation}: {existing} and {class}"
            ))),
            _ => {
                map.insert(relation.clone(), class.clone());
                Ok(())
            }
        }
    }

    pub fn build(self) -> Result<Ontology> {
        let referenced = self
            .domain_of
            .values()
            .chain(self.range_of.values())
            .chain(self.types_of.values().flatten());
        for class in referenced {
            if !self.classes.contains(class) {
                return Err(Error::Ontology(format!("undeclared class {class}")));
            }
        }
        let ancestors = closure(&self.classes, &self.subclass_of)?;
        Ok(Ontology {
            classes: self.classes,
            relations: self.relations,
            subclass_of: self.subclass_of,
            subproperty_of: self.subproperty_of,
            domain_of: self.domain_of,
            range_of: self.range_of,
            types_of: self.types_of,
            ancestors,
        })
    }
}

/// Reflexive-transitive closure; rejects cycles.
fn closure(
    classes: &BTreeSet<Iri>,
    edges: &BTreeMap<Iri, BTreeSet<Iri>>,
) -> Result<BTreeMap<Iri, BTreeSet<Iri>>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit(
        class: &Iri,
        edges: &BTreeMap<Iri, BTreeSet<Iri>>,
        marks: &mut HashMap<Iri, Mark>,
        out: &mut BTreeMap<Iri, BTreeSet<Iri>>,
    ) -> Result<()> {
        match marks.get(class) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => {
                return Err(Error::Ontology(format!(
                    "cyclic subclass hierarchy through {class}"
                )))
            }
            None => {}
        }
        marks.insert(class.clone(), Mark::Active);
        let mut set = BTreeSet::from([class.clone()]);
        for sup in edges.get(class).into_iter().flatten() {
            visit(sup, edges, marks, out)?;
            set.extend(out[sup].iter().cloned());
        }
        marks.insert(class.clone(), Mark::Done);
        out.insert(class.clone(), set);
        Ok(())
    }

    let mut marks = HashMap::new();
    let mut out = BTreeMap::new();
    for class in classes {
        visit(class, edges, &mut marks, &mut out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SnapshotStats {
    pub triples: usize,
    pub entities: usize,
    pub relations: usize,
    pub classes: usize,
    pub declared_relations: usize,
    pub typed_entities: usize,
}

impl fmt::Display for SnapshotStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "triples            {}", self.triples)?;
        writeln!(f, "entities           {}", self.entities)?;
        writeln!(f, "relations          {}", self.relations)?;
        writeln!(f, "classes            {}", self.classes)?;
        writeln!(f, "declared relations {}", self.declared_relations)?;
        write!(f, "typed entities     {}", self.typed_entities)
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub graph: KnowledgeGraph,
    pub ontology: Ontology,
}

impl Snapshot {
    pub fn stats(&self) -> SnapshotStats {
        SnapshotStats {
            triples: self.graph.triple_count(),
            entities: self.graph.entity_count(),
            relations: self.graph.relation_count(),
            classes: self.ontology.class_count(),
            declared_relations: self.ontology.relation_count(),
            typed_entities: self.ontology.typed_entity_count(),
        }
    }
}

pub fn load_snapshot(triples_file: &Path, ontology_file: &Path) -> Result<Snapshot> {
    let triples = read_to_string(triples_file)?;
    let ontology = read_to_string(ontology_file)?;
    Ok(Snapshot {
        graph: parse_triples(&triples, triples_file)?,
        ontology: parse_ontology(&ontology, ontology_file)?,
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Splits a statement line into its three fields. `None` for blank and
/// comment-only lines.
fn statement_fields(line: &str) -> std::result::Result<Option<[&str; 3]>, String> {
    let mut fields: Vec<&str> = line
        .split_whitespace()
        .take_while(|token| !token.starts_with('#'))
        .collect();
    if fields.last() == Some(&".") {
        fields.pop();
    }
    match fields.as_slice() {
        [] => Ok(None),
        [head, relation, tail] => Ok(Some([head, relation, tail])),
        _ => Err(format!(
            "expected 3 fields (head relation tail), found {}",
            fields.len()
        )),
    }
}

pub fn parse_triples(text: &str, origin: &Path) -> Result<KnowledgeGraph> {
    let mut graph = KnowledgeGraph::new();
    for (index, line) in text.lines().enumerate() {
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: index + 1,
            message,
        };
        let Some([head, relation, tail]) = statement_fields(line).map_err(err)? else {
            continue;
        };
        let triple = Triple::parse(head, relation, tail).map_err(|e| err(e.to_string()))?;
        graph.insert(triple);
    }
    Ok(graph)
}

pub fn parse_ontology(text: &str, origin: &Path) -> Result<Ontology> {
    let mut builder = Ontology::builder();
    for (index, line) in text.lines().enumerate() {
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: index + 1,
            message,
        };
        let Some([subject, predicate, object]) = statement_fields(line).map_err(err)? else {
            continue;
        };
        apply_statement(&mut builder, subject, predicate, object)
            .map_err(|e| err(e.to_string()))?;
    }
    builder.build()
}

fn apply_statement(
    builder: &mut OntologyBuilder,
    subject: &str,
    predicate: &str,
    object: &str,
) -> Result<()> {
    let subject = Iri::parse(subject)?;
    let object = Iri::parse(object)?;
    match predicate {
        RDF_TYPE if CLASS_MARKERS.contains(&object.as_str()) => builder.class(&subject)?,
        RDF_TYPE if PROPERTY_MARKERS.contains(&object.as_str()) => builder.relation(&subject)?,
        RDF_TYPE => builder.typed(&subject, &object)?,
        RDFS_SUBCLASS_OF => builder.subclass(&subject, &object)?,
        RDFS_SUBPROPERTY_OF => builder.subproperty(&subject, &object)?,
        RDFS_DOMAIN => builder.domain(&subject, &object)?,
        RDFS_RANGE => builder.range(&subject, &object)?,
        other => return Err(Error::InvalidInput(format!("unsupported ontology relation {other}"))),
    };
    Ok(())
}
