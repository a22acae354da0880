use std::collections::BTreeSet;

use crate::iri::{Iri, IriKind};
use crate::kg::Ontology;
use crate::path::KgPath;

pub const INSERT_COST: f64 = 1.0;
pub const DELETE_COST: f64 = 1.0;
const SIMILAR_COST: f64 = 0.5;
const DIFFERENT_COST: f64 = 1.0;

/// Costs for editing one path element sequence into another.
///
/// Substituting an element by one of the same kind costs 0.5 when the two are
/// ontologically close: relations where one is a direct subproperty of the
/// other or both share a direct superproperty, and entities whose
/// most-specific types intersect.
#[derive(Debug, Clone, Copy)]
pub struct EditCostModel<'a> {
    ontology: Option<&'a Ontology>,
}

impl<'a> EditCostModel<'a> {
    pub fn new(ontology: &'a Ontology) -> Self {
        EditCostModel {
            ontology: Some(ontology),
        }
    }

    /// Every substitution of distinct elements costs 1.
    pub fn plain() -> Self {
        EditCostModel { ontology: None }
    }

    pub fn insert_cost(&self, _element: &Iri) -> f64 {
        INSERT_COST
    }

    pub fn delete_cost(&self, _element: &Iri) -> f64 {
        DELETE_COST
    }

    pub fn substitute(&self, a: &Iri, b: &Iri) -> f64 {
        if a == b {
            return 0.0;
        }
        if a.kind() != b.kind() {
            return DIFFERENT_COST;
        }
        match self.ontology {
            Some(ontology) if similar(ontology, a, b) => SIMILAR_COST,
            _ => DIFFERENT_COST,
        }
    }
}

fn similar(ontology: &Ontology, a: &Iri, b: &Iri) -> bool {
    match a.kind() {
        IriKind::Relation => {
            let supers_a: BTreeSet<&Iri> = ontology.direct_superproperties(a).collect();
            let supers_b: BTreeSet<&Iri> = ontology.direct_superproperties(b).collect();
            supers_a.contains(b) || supers_b.contains(a) || !supers_a.is_disjoint(&supers_b)
        }
        IriKind::Entity => {
            let types_a = ontology.most_specific_types(a);
            let types_b = ontology.most_specific_types(b);
            !types_a.is_disjoint(&types_b)
        }
        IriKind::Class => false,
    }
}

/// Minimum total cost of insertions, deletions and substitutions turning `s` into `target`.
pub fn geo_elements(s: &[Iri], target: &[Iri], cost: &EditCostModel) -> f64 {
    let mut prev: Vec<f64> = Vec::with_capacity(target.len() + 1);
    prev.push(0.0);
    for t in target {
        let last = *prev.last().unwrap();
        prev.push(last + cost.insert_cost(t));
    }
    let mut row = vec![0.0; target.len() + 1];
    for a in s {
        row[0] = prev[0] + cost.delete_cost(a);
        for (j, b) in target.iter().enumerate() {
            let delete = prev[j + 1] + cost.delete_cost(a);
            let insert = row[j] + cost.insert_cost(b);
            let substitute = prev[j] + cost.substitute(a, b);
            row[j + 1] = delete.min(insert).min(substitute);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[target.len()]
}

/// Edit distance between a generated path (`None` when none could be parsed)
/// and the ground truth.
pub fn geo(s: Option<&KgPath>, s_star: &KgPath, cost: &EditCostModel) -> f64 {
    geo_elements(s.map_or(&[], KgPath::elements), s_star.elements(), cost)
}

/// `min(geo / |s_star|, 1)` with `|s_star|` counted in elements.
pub fn ngeo(s: Option<&KgPath>, s_star: &KgPath, cost: &EditCostModel) -> f64 {
    (geo(s, s_star, cost) / s_star.len() as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_ontology;
    use crate::path::{parse_path, ParseOutcome};
    use proptest::prelude::*;
    use std::path::Path;

    fn iris(text: &str) -> Vec<Iri> {
        text.split_whitespace().map(|t| Iri::parse(t).unwrap()).collect()
    }

    fn path(text: &str) -> KgPath {
        match parse_path(text) {
            ParseOutcome::WellFormed(p) => p,
            other => panic!("{other:?}"),
        }
    }

    fn ontology() -> Ontology {
        parse_ontology(
            "\
dbo:Person rdf:type owl:Class
dbo:Film rdf:type owl:Class
dbo:birthPlace rdfs:subPropertyOf dbo:location
dbo:deathPlace rdfs:subPropertyOf dbo:location
dbr:Brad_Pitt rdf:type dbo:Person
dbr:Jonah_Hill rdf:type dbo:Person
dbr:Moneyball_(film) rdf:type dbo:Film
",
            Path::new("o"),
        )
        .unwrap()
    }

    #[test]
    fn worked_examples() {
        let cost = EditCostModel::plain();
        let truth = path("dbr:A, dbo:r1, dbr:B");
        let generated = path("dbr:A, dbo:r2, dbr:B");
        assert_eq!(geo(Some(&generated), &truth, &cost), 1.0);
        assert_eq!(ngeo(Some(&generated), &truth, &cost), 1.0 / 3.0);
        assert_eq!(geo(None, &truth, &cost), 3.0);
        assert_eq!(ngeo(None, &truth, &cost), 1.0);
        assert_eq!(ngeo(Some(&truth), &truth, &cost), 0.0);
    }

    #[test]
    fn similarity_rules() {
        let o = ontology();
        let cost = EditCostModel::new(&o);
        let [birth, death, location, starring] = ["dbo:birthPlace", "dbo:deathPlace", "dbo:location", "dbo:starring"]
            .map(|s| Iri::parse(s).unwrap());
        assert_eq!(cost.substitute(&birth, &death), 0.5);
        assert_eq!(cost.substitute(&birth, &location), 0.5);
        assert_eq!(cost.substitute(&location, &birth), 0.5);
        assert_eq!(cost.substitute(&birth, &starring), 1.0);
        let [pitt, hill, film, nobody] = ["dbr:Brad_Pitt", "dbr:Jonah_Hill", "dbr:Moneyball_(film)", "dbr:Nobody"]
            .map(|s| Iri::parse(s).unwrap());
        assert_eq!(cost.substitute(&pitt, &hill), 0.5);
        assert_eq!(cost.substitute(&pitt, &film), 1.0);
        assert_eq!(cost.substitute(&nobody, &pitt), 1.0);
        assert_eq!(cost.substitute(&pitt, &birth), 1.0);
        assert_eq!(cost.substitute(&pitt, &pitt), 0.0);
    }

    #[test]
    fn similar_substitution_beats_delete_insert() {
        let o = ontology();
        let cost = EditCostModel::new(&o);
        let a = iris("dbr:Brad_Pitt dbo:birthPlace dbr:X");
        let b = iris("dbr:Jonah_Hill dbo:deathPlace dbr:X");
        assert_eq!(geo_elements(&a, &b, &cost), 1.0);
    }

    fn element() -> impl Strategy<Value = Iri> {
        prop_oneof![
            (0..4u8).prop_map(|i| Iri::parse(&format!("dbr:E{i}")).unwrap()),
            (0..3u8).prop_map(|i| Iri::parse(&format!("dbo:r{i}")).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn geo_is_symmetric(a in prop::collection::vec(element(), 0..8), b in prop::collection::vec(element(), 0..8)) {
            let cost = EditCostModel::plain();
            prop_assert_eq!(geo_elements(&a, &b, &cost), geo_elements(&b, &a, &cost));
        }

        #[test]
        fn geo_bounded_by_lengths(a in prop::collection::vec(element(), 0..8), b in prop::collection::vec(element(), 0..8)) {
            let cost = EditCostModel::plain();
            let d = geo_elements(&a, &b, &cost);
            prop_assert!(d >= (a.len() as f64 - b.len() as f64).abs());
            prop_assert!(d <= a.len().max(b.len()) as f64);
        }

        #[test]
        fn appending_a_hop_costs_at_most_two(
            a in prop::collection::vec(element(), 0..8),
            b in prop::collection::vec(element(), 1..8),
        ) {
            let cost = EditCostModel::plain();
            let mut longer = a.clone();
            longer.push(Iri::parse("dbo:unrelatedHop").unwrap());
            longer.push(Iri::parse("dbr:Unrelated_Entity").unwrap());
            let before = geo_elements(&a, &b, &cost);
            let after = geo_elements(&longer, &b, &cost);
            prop_assert!(after <= before + 2.0);
        }
    }
}
