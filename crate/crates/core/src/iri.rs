//! Prefixed IRIs (`dbr:Brad_Pitt`, `dbo:starring`, `dbo:Person`).
//!
//! The kind of an IRI is a pure function of its text: `dbr:` names are
//! entities; any other prefix names a class when the local name starts with
//! an uppercase letter and a relation otherwise, following the DBpedia
//! ontology's capitalisation convention.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const ENTITY_PREFIX: &str = "dbr";
pub const ONTOLOGY_PREFIX: &str = "dbo";
pub const PROPERTY_PREFIX: &str = "dbp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IriKind {
    Entity,
    Relation,
    Class,
}

impl IriKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IriKind::Entity => "entity",
            IriKind::Relation => "relation",
            IriKind::Class => "class",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iri {
    value: String,
    colon: usize,
    kind: IriKind,
}

impl Iri {
    pub fn parse(text: &str) -> Result<Self> {
        let colon = text
            .find(':')
            .ok_or_else(|| Error::InvalidIri(text.to_string()))?;
        let (prefix, local) = (&text[..colon], &text[colon + 1..]);
        if !is_prefix(prefix) || local.is_empty() || local.chars().any(char::is_whitespace) {
            return Err(Error::InvalidIri(text.to_string()));
        }
        let kind = if prefix == ENTITY_PREFIX {
            IriKind::Entity
        } else if local.starts_with(|c: char| c.is_uppercase()) {
            IriKind::Class
        } else {
            IriKind::Relation
        };
        Ok(Iri {
            value: text.to_string(),
            colon,
            kind,
        })
    }

    /// Parses and checks the kind in one go.
    pub fn parse_kind(text: &str, expected: IriKind) -> Result<Self> {
        let iri = Self::parse(text)?;
        iri.expect_kind(expected)?;
        Ok(iri)
    }

    pub fn expect_kind(&self, expected: IriKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::WrongKind {
                iri: self.value.clone(),
                expected: expected.as_str(),
            })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.value
    }

    pub fn prefix(&self) -> &str {
        &self.value[..self.colon]
    }

    pub fn local_name(&self) -> &str {
        &self.value[self.colon + 1..]
    }

    pub fn kind(&self) -> IriKind {
        self.kind
    }

    pub fn is_entity(&self) -> bool {
        self.kind == IriKind::Entity
    }

    pub fn is_relation(&self) -> bool {
        self.kind == IriKind::Relation
    }

    pub fn is_class(&self) -> bool {
        self.kind == IriKind::Class
    }

    /// Human-readable surface form: underscores become spaces and a trailing
    /// parenthetical qualifier is dropped (`The_Big_Short_(film)` -> `The Big Short`).
    pub fn surface_form(&self) -> String {
        let local = self.local_name();
        let trimmed = match local.rfind("_(") {
            Some(pos) if local.ends_with(')') && pos > 0 => &local[..pos],
            _ => local,
        };
        trimmed.replace('_', " ")
    }
}

pub(crate) fn is_prefix(prefix: &str) -> bool {
    let mut chars = prefix.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.value)
    }
}

impl fmt::Debug for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Iri({})", self.value)
    }
}

impl FromStr for Iri {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Iri::parse(s)
    }
}

impl Serialize for Iri {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.value)
    }
}

impl<'de> Deserialize<'de> for Iri {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Iri::parse(&text).map_err(serde::de::Error::custom)
    }
}
