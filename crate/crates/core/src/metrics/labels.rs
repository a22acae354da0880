use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Evaluation, RunRecord};
use crate::hallucination::Verdict;

use super::accuracy::{soft_accuracy, SoftOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactLabel {
    CorrectFact,
    IncorrectFact,
}

impl FactLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FactLabel::CorrectFact => "CorrectFact",
            FactLabel::IncorrectFact => "IncorrectFact",
        }
    }
}

impl fmt::Display for FactLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CorrectFact" => Ok(FactLabel::CorrectFact),
            "IncorrectFact" => Ok(FactLabel::IncorrectFact),
            other => Err(Error::InvalidInput(format!(
                "label must be CorrectFact or IncorrectFact, got {other:?}"
            ))),
        }
    }
}

/// Human factuality labels keyed by `(query id, canonical answer)`.
///
/// Answers are IRIs for single-answer tasks and `head relation tail` for
/// path hops.
///
/// File format, one label per line:
///
/// ```text
/// query_id<TAB>answer<TAB>CorrectFact|IncorrectFact
/// ```
///
/// Lines with an empty label column are unlabeled and skipped, so an export
/// can be filled in and imported as is.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelStore {
    entries: BTreeMap<(String, String), FactLabel>,
}

impl LabelStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, query_id: &str, answer: &str) -> Option<FactLabel> {
        self.entries
            .get(&(query_id.to_string(), answer.to_string()))
            .copied()
    }

    /// Adds a label. Re-adding the same label is a no-op; a different label
    /// for an existing key is an error.
    pub fn insert(&mut self, query_id: &str, answer: &str, label: FactLabel) -> Result<()> {
        for field in [query_id, answer] {
            if field.is_empty() || field.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidInput(format!(
                    "label key field {field:?} is empty or contains a tab or newline"
                )));
            }
        }
        let key = (query_id.to_string(), answer.to_string());
        match self.entries.get(&key) {
            Some(existing) if *existing != label => Err(Error::InvalidInput(format!(
                "conflicting labels for {query_id} / {answer}: {existing} and {label}"
            ))),
            _ => {
                self.entries.insert(key, label);
                Ok(())
            }
        }
    }

    pub fn merge(&mut self, other: &LabelStore) -> Result<()> {
        for ((query_id, answer), label) in &other.entries {
            self.insert(query_id, answer, *label)?;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, FactLabel)> {
        self.entries
            .iter()
            .map(|((q, a), l)| (q.as_str(), a.as_str(), *l))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut store = LabelStore::new();
        for (index, line) in text.lines().enumerate() {
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: index + 1,
                message,
            };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [query_id, answer, label] = fields[..] else {
                return Err(parse_err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let label = label.trim();
            if label.is_empty() {
                continue;
            }
            let label: FactLabel = label.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            store
                .insert(query_id, answer, label)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_tsv(&self) -> String {
        self.iter()
            .map(|(q, a, l)| format!("{q}\t{a}\t{l}\n"))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::llm::write_atomic(path, self.to_tsv().as_bytes())
    }
}

/// Keys still awaiting a human label: unresolved answers and content-suspect
/// path hops. Sorted and deduplicated.
pub fn unresolved_items(records: &[RunRecord], labels: &LabelStore) -> Vec<(String, String)> {
    let mut out = BTreeSet::new();
    for record in records {
        match &record.evaluation {
            Evaluation::Answer(answer) => {
                if soft_accuracy(answer, &record.query_id, labels) == SoftOutcome::Unresolved {
                    out.insert((record.query_id.clone(), answer.canonical.clone()));
                }
            }
            Evaluation::Path(path) => {
                for hop in &path.hop_verdicts {
                    let key = hop.triple.to_string();
                    if hop.verdict == Verdict::ContentSuspect && labels.get(&record.query_id, &key).is_none() {
                        out.insert((record.query_id.clone(), key));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}
