//! Knowledge-graph paths and the free-text path parser.
//!
//! A path alternates entities and relations, starting and ending with an
//! entity: `dbr:Playtone, dbo:founder, dbr:Tom_Hanks`. Elements are separated
//! by `,` or `-`. A separator only counts when it touches whitespace or is
//! immediately followed by a `dbr:`/`dbo:`/`dbp:` prefix, so hyphens and
//! commas inside local names (`dbr:Spider-Man`, `dbr:Reading,_Berkshire`)
//! survive.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::iri::{Iri, IriKind, ENTITY_PREFIX, ONTOLOGY_PREFIX, PROPERTY_PREFIX};
use crate::kg::{PathHop, Triple};

const PATH_PREFIXES: [&str; 3] = [ENTITY_PREFIX, ONTOLOGY_PREFIX, PROPERTY_PREFIX];
const SEPARATORS: [char; 2] = [',', '-'];

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct KgPath {
    elements: Vec<Iri>,
}

impl KgPath {
    pub fn new(elements: Vec<Iri>) -> Result<Self> {
        if elements.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "path must have an odd number of elements, got {}",
                elements.len()
            )));
        }
        for (i, element) in elements.iter().enumerate() {
            let expected = if i % 2 == 0 {
                IriKind::Entity
            } else {
                IriKind::Relation
            };
            element.expect_kind(expected)?;
        }
        Ok(KgPath { elements })
    }

    pub fn single(entity: Iri) -> Result<Self> {
        Self::new(vec![entity])
    }

    pub(crate) fn from_hops(start: Iri, hops: &[PathHop]) -> Self {
        let mut elements = Vec::with_capacity(hops.len() * 2 + 1);
        elements.push(start);
        for hop in hops {
            elements.push(hop.relation.clone());
            elements.push(hop.to.clone());
        }
        KgPath { elements }
    }

    pub fn elements(&self) -> &[Iri] {
        &self.elements
    }

    /// Element count, entities plus relations.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn hop_count(&self) -> usize {
        (self.elements.len() - 1) / 2
    }

    pub fn head(&self) -> &Iri {
        &self.elements[0]
    }

    pub fn tail(&self) -> &Iri {
        &self.elements[self.elements.len() - 1]
    }

    /// Each hop as a triple in written orientation (left entity is the head).
    pub fn hops(&self) -> impl Iterator<Item = Triple> + '_ {
        self.elements.windows(3).step_by(2).map(|w| Triple {
            head: w[0].clone(),
            relation: w[1].clone(),
            tail: w[2].clone(),
        })
    }
}

impl fmt::Display for KgPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_path(self))
    }
}

impl fmt::Debug for KgPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KgPath[{}]", render_path(self))
    }
}

impl Serialize for KgPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_path(self))
    }
}

impl<'de> Deserialize<'de> for KgPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        match parse_path(&text) {
            ParseOutcome::WellFormed(path) => Ok(path),
            other => Err(serde::de::Error::custom(format!(
                "invalid path {text:?}: {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReasonCode {
    BadPrefix,
    NotAlternating,
    EvenLength,
    EmptyInput,
}

impl ReasonCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::BadPrefix => "BadPrefix",
            ReasonCode::NotAlternating => "NotAlternating",
            ReasonCode::EvenLength => "EvenLength",
            ReasonCode::EmptyInput => "EmptyInput",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseOutcome {
    WellFormed(KgPath),
    IllFormatted(ReasonCode),
    MultiplePaths(usize),
}

impl ParseOutcome {
    pub fn path(&self) -> Option<&KgPath> {
        match self {
            ParseOutcome::WellFormed(path) => Some(path),
            _ => None,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        matches!(self, ParseOutcome::WellFormed(_))
    }

    /// Stable tag used in run records.
    pub fn status_tag(&self) -> &'static str {
        match self {
            ParseOutcome::WellFormed(_) => "WellFormed",
            ParseOutcome::IllFormatted(_) => "IllFormatted",
            ParseOutcome::MultiplePaths(_) => "MultiplePaths",
        }
    }
}

impl fmt::Display for ParseOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseOutcome::WellFormed(path) => write!(f, "WellFormed({path})"),
            ParseOutcome::IllFormatted(reason) => write!(f, "IllFormatted({})", reason.as_str()),
            ParseOutcome::MultiplePaths(n) => write!(f, "MultiplePaths({n})"),
        }
    }
}

pub fn render_path(path: &KgPath) -> String {
    let mut out = String::new();
    for (i, element) in path.elements.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(element.as_str());
    }
    out
}

/// Parses one path string. All failures are reported as `IllFormatted`.
pub fn parse_path(text: &str) -> ParseOutcome {
    if text.trim().is_empty() {
        return ParseOutcome::IllFormatted(ReasonCode::EmptyInput);
    }
    let pieces = split_elements(text);
    classify(&pieces)
}

fn split_elements(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut prev: Option<char> = None;
    for (i, c) in text.char_indices() {
        if SEPARATORS.contains(&c) {
            let rest = &text[i + c.len_utf8()..];
            let touches_space = prev.is_some_and(char::is_whitespace)
                || rest.starts_with(char::is_whitespace);
            if touches_space || starts_with_path_prefix(rest) {
                pieces.push(text[start..i].trim());
                start = i + c.len_utf8();
            }
        }
        prev = Some(c);
    }
    pieces.push(text[start..].trim());
    pieces
}

fn starts_with_path_prefix(text: &str) -> bool {
    PATH_PREFIXES.iter().any(|prefix| {
        text.strip_prefix(prefix)
            .is_some_and(|rest| rest.starts_with(':'))
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Entity,
    Relation,
}

fn slot_of(token: &str) -> Option<(Slot, Iri)> {
    let iri = Iri::parse(token).ok()?;
    let slot = match (iri.prefix(), iri.kind()) {
        (ENTITY_PREFIX, IriKind::Entity) => Slot::Entity,
        (ONTOLOGY_PREFIX | PROPERTY_PREFIX, IriKind::Relation) => Slot::Relation,
        _ => return None,
    };
    Some((slot, iri))
}

fn classify(tokens: &[&str]) -> ParseOutcome {
    if tokens.is_empty() {
        return ParseOutcome::IllFormatted(ReasonCode::EmptyInput);
    }
    let mut slots = Vec::with_capacity(tokens.len());
    let mut elements = Vec::with_capacity(tokens.len());
    for token in tokens {
        match slot_of(token) {
            Some((slot, iri)) => {
                slots.push(slot);
                elements.push(iri);
            }
            None => return ParseOutcome::IllFormatted(ReasonCode::BadPrefix),
        }
    }
    if slots.windows(2).any(|w| w[0] == w[1]) {
        return ParseOutcome::IllFormatted(ReasonCode::NotAlternating);
    }
    if slots.len() % 2 == 0 {
        return ParseOutcome::IllFormatted(ReasonCode::EvenLength);
    }
    if slots[0] != Slot::Entity {
        return ParseOutcome::IllFormatted(ReasonCode::BadPrefix);
    }
    ParseOutcome::WellFormed(KgPath { elements })
}

/// A prefixed-IRI-looking token found in free text, with its byte span.
#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

/// Finds candidate IRIs in free text. A candidate is `prefix:local` where the
/// prefix is alphanumeric starting with a letter and the local part is a
/// non-empty run of non-whitespace characters. Trailing sentence punctuation
/// and unbalanced closing brackets are not part of the token.
fn lex_iris(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < text.len() {
        let at_boundary = i == 0 || {
            let prev = text[..i].chars().next_back().unwrap();
            !(prev.is_alphanumeric() || prev == '_' || prev == '/')
        };
        if !(at_boundary && bytes[i].is_ascii_alphabetic()) {
            i += text[i..].chars().next().map_or(1, char::len_utf8);
            continue;
        }
        let prefix_end = i + text[i..]
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(text.len() - i);
        if !text[prefix_end..].starts_with(':') {
            i = prefix_end.max(i + 1);
            continue;
        }
        let local_start = prefix_end + 1;
        let run_end = local_start
            + text[local_start..]
                .find(char::is_whitespace)
                .unwrap_or(text.len() - local_start);
        let local = &text[local_start..run_end];
        let known_prefix = PATH_PREFIXES.contains(&&text[i..prefix_end]);
        if local.is_empty() || local.starts_with("//") || (!known_prefix && starts_with_path_prefix(local)) {
            // `Answer:dbr:X` style labels: rescan from the inner prefix.
            i = if local.is_empty() { local_start } else { local_start.max(i + 1) };
            continue;
        }
        let mut piece_start = i;
        for (offset, c) in text[local_start..run_end].char_indices() {
            let at = local_start + offset;
            if SEPARATORS.contains(&c) && starts_with_path_prefix(&text[at + 1..run_end]) {
                push_token(&mut tokens, text, piece_start, at);
                piece_start = at + 1;
            }
        }
        push_token(&mut tokens, text, piece_start, run_end);
        i = run_end;
    }
    tokens
}

fn push_token<'a>(tokens: &mut Vec<Token<'a>>, text: &'a str, start: usize, end: usize) {
    let mut piece = &text[start..end];
    while let Some(last) = piece.chars().next_back() {
        let strip = match last {
            ',' | '-' | '.' | ';' | ':' | '!' | '?' | '"' | '\'' | '`' | '*' => true,
            ')' => piece.matches(')').count() > piece.matches('(').count(),
            ']' => piece.matches(']').count() > piece.matches('[').count(),
            _ => false,
        };
        if !strip {
            break;
        }
        piece = &piece[..piece.len() - last.len_utf8()];
    }
    let Some(colon) = piece.find(':') else {
        return;
    };
    if colon + 1 >= piece.len() {
        return;
    }
    tokens.push(Token {
        text: piece,
        start,
        end: start + piece.len(),
    });
}

/// Whether two adjacent tokens are joined into the same candidate path: the
/// text between them must hold exactly one separator, optionally surrounded
/// by spaces and emphasis marks. A line break is allowed only after the
/// separator.
fn joins(gap: &str) -> bool {
    let gap: String = gap.chars().filter(|c| !matches!(c, '*' | '`' | '"' | '\'')).collect();
    let before = gap.trim_start_matches([' ', '\t']);
    let mut chars = before.chars();
    match chars.next() {
        Some(c) if SEPARATORS.contains(&c) => chars.as_str().chars().all(char::is_whitespace),
        _ => false,
    }
}

/// Every candidate path in `llm_output`, in order of appearance.
pub fn extract_paths(llm_output: &str) -> Vec<ParseOutcome> {
    let tokens = lex_iris(llm_output);
    let mut groups: Vec<Vec<Token<'_>>> = Vec::new();
    for token in tokens {
        match groups.last_mut() {
            Some(group) if joins(&llm_output[group.last().unwrap().end..token.start]) => {
                group.push(token)
            }
            _ => groups.push(vec![token]),
        }
    }
    groups
        .iter()
        .map(|group| {
            let texts: Vec<&str> = group.iter().map(|t| t.text).collect();
            classify(&texts)
        })
        .collect()
}

/// Verdict on a whole generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub outcome: ParseOutcome,
    pub warnings: Vec<String>,
}

/// Reduces candidate outcomes to a single verdict for a path answer.
///
/// Single-entity mentions are not path answers and are skipped. More than one
/// well-formed multi-hop candidate makes the generation ill-formatted
/// (`MultiplePaths`); one well-formed candidate next to ill-formatted ones is
/// scored with a warning; no candidate at all is `EmptyInput`.
pub fn judge_generation(candidates: &[ParseOutcome]) -> Judgment {
    let mut well_formed = Vec::new();
    let mut ill = Vec::new();
    for candidate in candidates {
        match candidate {
            ParseOutcome::WellFormed(path) if path.hop_count() == 0 => {}
            ParseOutcome::WellFormed(path) => well_formed.push(path),
            ParseOutcome::IllFormatted(reason) => ill.push(*reason),
            ParseOutcome::MultiplePaths(_) => {}
        }
    }
    let mut warnings = Vec::new();
    let outcome = match (well_formed.as_slice(), ill.first()) {
        ([path], _) => {
            if !ill.is_empty() {
                warnings.push(format!(
                    "scored the only well-formed candidate, ignored {} ill-formatted candidate(s)",
                    ill.len()
                ));
            }
            ParseOutcome::WellFormed((*path).clone())
        }
        ([], Some(reason)) => ParseOutcome::IllFormatted(*reason),
        ([], None) => ParseOutcome::IllFormatted(ReasonCode::EmptyInput),
        (many, _) => ParseOutcome::MultiplePaths(many.len()),
    };
    Judgment { outcome, warnings }
}

/// Convenience: extract and judge in one step.
pub fn judge_text(llm_output: &str) -> Judgment {
    judge_generation(&extract_paths(llm_output))
}

/// All IRIs mentioned in free text, in order, deduplicated by first occurrence.
pub fn mentioned_iris(text: &str) -> Vec<Iri> {
    let mut out: Vec<Iri> = Vec::new();
    for token in lex_iris(text) {
        if let Ok(iri) = Iri::parse(token.text) {
            if !out.contains(&iri) {
                out.push(iri);
            }
        }
    }
    out
}
