//! Prompt templates and the multi-step contextual path pipeline.
//!
//! Templates live in `prompts/` (see the README there) and are compiled in;
//! [`TemplateSet::from_dir`] loads an edited copy instead.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iri::{Iri, IriKind};
use crate::llm::{cache_key, sha256_hex, ChatClient, LlmError, RequestTemplate};
use crate::path::mentioned_iris;
use crate::tasks::{Query, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    SingleStep,
    #[serde(rename = "single-step-autocot")]
    SingleStepAutoCoT,
    MultiStep,
    SimpleInstruction,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::SingleStep,
        Strategy::SingleStepAutoCoT,
        Strategy::MultiStep,
        Strategy::SimpleInstruction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SingleStep => "single-step",
            Strategy::SingleStepAutoCoT => "single-step-autocot",
            Strategy::MultiStep => "multi-step",
            Strategy::SimpleInstruction => "simple-instruction",
        }
    }

    pub fn supports(self, kind: TaskKind) -> bool {
        match self {
            Strategy::SingleStep | Strategy::SingleStepAutoCoT => true,
            Strategy::MultiStep | Strategy::SimpleInstruction => kind.is_path_task(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|strategy| strategy.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy {s:?}")))
    }
}

/// One request of the multi-step pipeline.
#[derive(Debug, Clone, Copy)]
pub enum Step<'a> {
    SupportSentences,
    EntityLinking { support_sentences: &'a str },
    PathGeneration { support_sentences: &'a str, head: &'a Iri, tail: &'a Iri },
}

impl Step<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Step::SupportSentences => "1-support-sentences",
            Step::EntityLinking { .. } => "2-entity-linking",
            Step::PathGeneration { .. } => "3-path-generation",
        }
    }
}

fn task_file_stem(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::TailPrediction => "tail-prediction",
        TaskKind::RelationPrediction => "relation-prediction",
        TaskKind::RelationExtraction => "relation-extraction",
        TaskKind::ContextualPathGeneration => "contextual-path-generation",
    }
}

const AUTOCOT: &str = "autocot.suffix";

const EMBEDDED: [(&str, &str); 9] = [
    ("tail-prediction.single-step", include_str!("../prompts/tail-prediction.single-step.txt")),
    ("relation-prediction.single-step", include_str!("../prompts/relation-prediction.single-step.txt")),
    ("relation-extraction.single-step", include_str!("../prompts/relation-extraction.single-step.txt")),
    ("contextual-path-generation.single-step", include_str!("../prompts/contextual-path-generation.single-step.txt")),
    ("contextual-path-generation.simple-instruction", include_str!("../prompts/contextual-path-generation.simple-instruction.txt")),
    (
        "contextual-path-generation.multi-step.1-support-sentences",
        include_str!("../prompts/contextual-path-generation.multi-step.1-support-sentences.txt"),
    ),
    (
        "contextual-path-generation.multi-step.2-entity-linking",
        include_str!("../prompts/contextual-path-generation.multi-step.2-entity-linking.txt"),
    ),
    (
        "contextual-path-generation.multi-step.3-path-generation",
        include_str!("../prompts/contextual-path-generation.multi-step.3-path-generation.txt"),
    ),
    (AUTOCOT, include_str!("../prompts/autocot.suffix.txt")),
];

fn strip_final_newline(text: &str) -> &str {
    text.strip_suffix('\n')
        .map(|t| t.strip_suffix('\r').unwrap_or(t))
        .unwrap_or(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::embedded()
    }
}

impl TemplateSet {
    pub fn embedded() -> Self {
        TemplateSet {
            templates: EMBEDDED
                .iter()
                .map(|(name, text)| (name.to_string(), strip_final_newline(text).to_string()))
                .collect(),
        }
    }

    /// Reads `<name>.txt` for every template name from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut templates = BTreeMap::new();
        for (name, _) in EMBEDDED {
            let path = dir.join(format!("{name}.txt"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            templates.insert(name.to_string(), strip_final_newline(&text).to_string());
        }
        Ok(TemplateSet { templates })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    fn template(&self, name: &str) -> Result<&str> {
        self.get(name)
            .ok_or_else(|| Error::InvalidInput(format!("no prompt template {name:?}")))
    }

    /// Prompt for a single-request strategy.
    pub fn render(&self, query: &Query, strategy: Strategy) -> Result<String> {
        if !strategy.supports(query.kind) {
            return Err(Error::InvalidInput(format!(
                "strategy {strategy} does not apply to {} queries",
                query.kind
            )));
        }
        let stem = task_file_stem(query.kind);
        let name = match strategy {
            Strategy::SingleStep | Strategy::SingleStepAutoCoT => format!("{stem}.single-step"),
            Strategy::SimpleInstruction => format!("{stem}.simple-instruction"),
            Strategy::MultiStep => {
                return Err(Error::InvalidInput(
                    "multi-step prompts are rendered one step at a time".into(),
                ))
            }
        };
        let mut prompt = fill(self.template(&name)?, &iri_values(query))?;
        if strategy == Strategy::SingleStepAutoCoT {
            prompt.push('\n');
            prompt.push_str(self.template(AUTOCOT)?);
        }
        Ok(prompt)
    }

    /// Prompt for one multi-step request. Steps 1 and 2 name the entities in
    /// prose; step 3 uses the IRIs linked in step 2.
    pub fn render_step(&self, query: &Query, step: Step<'_>) -> Result<String> {
        if !query.kind.is_path_task() {
            return Err(Error::InvalidInput(format!(
                "multi-step prompting does not apply to {} queries",
                query.kind
            )));
        }
        let name = format!("{}.multi-step.{}", task_file_stem(query.kind), step.name());
        let mut values = BTreeMap::new();
        match step {
            Step::SupportSentences => {
                values.insert("head_entity", Some(query.head_surface()));
                values.insert("tail_entity", query.tail_surface());
                values.insert("context", query.context.clone());
            }
            Step::EntityLinking { support_sentences } => {
                values.insert("head_entity", Some(query.head_surface()));
                values.insert("tail_entity", query.tail_surface());
                values.insert("support_sentences", Some(support_sentences.to_string()));
            }
            Step::PathGeneration { support_sentences, head, tail } => {
                values.insert("head_entity", Some(head.to_string()));
                values.insert("tail_entity", Some(tail.to_string()));
                values.insert("support_sentences", Some(support_sentences.to_string()));
            }
        }
        fill(self.template(&name)?, &values)
    }
}

fn iri_values(query: &Query) -> BTreeMap<&'static str, Option<String>> {
    BTreeMap::from([
        ("head_entity", Some(query.head.to_string())),
        ("tail_entity", query.tail.as_ref().map(Iri::to_string)),
        ("relation", query.relation.as_ref().map(Iri::to_string)),
        ("context", query.context.clone()),
    ])
}

/// Substitutes `{name}` placeholders in one left-to-right pass, so braces in
/// substituted values are left alone. Unknown `{...}` text is kept verbatim.
fn fill(template: &str, values: &BTreeMap<&str, Option<String>>) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_end = after
            .find('}')
            .filter(|&end| after[..end].chars().all(|c| c.is_ascii_lowercase() || c == '_') && end > 0);
        match name_end {
            Some(end) if is_placeholder(&after[..end]) => {
                let name = &after[..end];
                match values.get(name).cloned().flatten() {
                    Some(value) => out.push_str(&value),
                    None => return Err(Error::MissingPlaceholder(name.to_string())),
                }
                rest = &after[end + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn is_placeholder(name: &str) -> bool {
    matches!(
        name,
        "head_entity" | "tail_entity" | "relation" | "context" | "support_sentences"
    )
}

/// One request/response of a run, with enough provenance to re-derive it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub step: String,
    pub prompt_sha256: String,
    pub cache_key: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineTrace {
    pub exchanges: Vec<Exchange>,
    /// Response of the final step, when the pipeline got that far.
    pub final_text: Option<String>,
    /// Why the pipeline stopped early.
    pub failure: Option<String>,
    pub warnings: Vec<String>,
}

/// Sends one prompt and records the exchange.
pub fn exchange(
    client: &dyn ChatClient,
    request_template: &RequestTemplate,
    step: &str,
    prompt: &str,
    trial: u32,
) -> Result<Exchange, LlmError> {
    let request = request_template.request(prompt);
    let response = client.complete(&request, trial)?;
    Ok(Exchange {
        step: step.to_string(),
        prompt_sha256: sha256_hex(prompt),
        cache_key: cache_key(&request, trial),
        response,
    })
}

/// Support sentences, entity linking, then path generation. Stops after an
/// empty support-sentence answer or when fewer than two entities are linked;
/// those outcomes are reported in `failure`, not as errors. Endpoint
/// failures are errors.
pub fn run_multi_step(
    query: &Query,
    client: &dyn ChatClient,
    templates: &TemplateSet,
    request_template: &RequestTemplate,
    trial: u32,
) -> Result<PipelineTrace> {
    let mut trace = PipelineTrace::default();

    let step = Step::SupportSentences;
    let prompt = templates.render_step(query, step)?;
    let first = exchange(client, request_template, step.name(), &prompt, trial)?;
    let support = first.response.trim().to_string();
    trace.exchanges.push(first);
    if support.is_empty() {
        trace.failure = Some("support-sentence step returned nothing".into());
        return Ok(trace);
    }

    let step = Step::EntityLinking { support_sentences: &support };
    let prompt = templates.render_step(query, step)?;
    let second = exchange(client, request_template, step.name(), &prompt, trial)?;
    let mut linked: Vec<Iri> = mentioned_iris(&second.response)
        .into_iter()
        .filter(|iri| iri.kind() == IriKind::Entity)
        .collect();
    trace.exchanges.push(second);
    if linked.len() < 2 {
        trace.failure = Some(format!("entity linking produced {} entities, need 2", linked.len()));
        return Ok(trace);
    }
    if linked.len() > 2 {
        trace.warnings.push(format!(
            "entity linking produced {} entities; using the first two",
            linked.len()
        ));
        linked.truncate(2);
    }

    let step = Step::PathGeneration {
        support_sentences: &support,
        head: &linked[0],
        tail: &linked[1],
    };
    let prompt = templates.render_step(query, step)?;
    let third = exchange(client, request_template, step.name(), &prompt, trial)?;
    trace.final_text = Some(third.response.clone());
    trace.exchanges.push(third);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{FnClient, LlmRequest};
    use crate::path::{parse_path, ParseOutcome};
    use crate::tasks::GroundTruth;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn iri(s: &str) -> Iri {
        Iri::parse(s).unwrap()
    }

    fn cpg() -> Query {
        let ParseOutcome::WellFormed(path) = parse_path(
            "dbr:Quentin_Tarantino, dbo:director, dbr:Django_Unchained, dbo:starring, dbr:Christoph_Waltz",
        ) else {
            unreachable!()
        };
        Query {
            id: "cpg-1".into(),
            kind: TaskKind::ContextualPathGeneration,
            head: iri("dbr:Quentin_Tarantino"),
            tail: Some(iri("dbr:Christoph_Waltz")),
            relation: None,
            context: Some("Waltz starred in Tarantino's Django Unchained {2012}.".into()),
            ground_truth: GroundTruth::Path(path),
            head_aliases: vec!["Tarantino".into()],
            tail_aliases: vec![],
            document: None,
        }
    }

    #[test]
    fn tail_prediction_prompt() {
        let q = Query {
            id: "t".into(),
            kind: TaskKind::TailPrediction,
            head: iri("dbr:Moneyball_(film)"),
            tail: None,
            relation: Some(iri("dbo:starring")),
            context: None,
            ground_truth: GroundTruth::Entity(iri("dbr:Brad_Pitt")),
            head_aliases: vec![],
            tail_aliases: vec![],
            document: None,
        };
        let t = TemplateSet::embedded();
        assert_eq!(
            t.render(&q, Strategy::SingleStep).unwrap(),
            "Complete the following DBPedia relation:\ndbr:Moneyball_(film) - dbo:starring - "
        );
        assert!(t
            .render(&q, Strategy::SingleStepAutoCoT)
            .unwrap()
            .ends_with("dbo:starring - \nLet's think step by step."));
        assert!(t.render(&q, Strategy::MultiStep).is_err());
        assert!(t.render(&q, Strategy::SimpleInstruction).is_err());
    }

    #[test]
    fn braces_in_context_survive() {
        let t = TemplateSet::embedded();
        let prompt = t.render(&cpg(), Strategy::SimpleInstruction).unwrap();
        assert_eq!(
            prompt,
            "Waltz starred in Tarantino's Django Unchained {2012}.\nInstruction: Generate the contextual path between dbr:Quentin_Tarantino and dbr:Christoph_Waltz."
        );
    }

    #[test]
    fn missing_value_is_reported() {
        let mut q = cpg();
        q.context = None;
        let err = TemplateSet::embedded().render(&q, Strategy::SingleStep).unwrap_err();
        assert!(matches!(err, Error::MissingPlaceholder(ref p) if p == "context"), "{err}");
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
    }

    #[test]
    fn multi_step_makes_three_requests() {
        let calls = AtomicUsize::new(0);
        let client = FnClient::new(|req: &LlmRequest, _| {
            let n = calls.fetch_add(1, Ordering::SeqCst);
            let prompt = req.last_user_prompt().unwrap();
            Ok(match n {
                0 => {
                    assert!(prompt.contains("between Tarantino and Christoph Waltz"), "{prompt}");
                    "Waltz starred in Django Unchained.".to_string()
                }
                1 => "dbr:Quentin_Tarantino and dbr:Christoph_Waltz".to_string(),
                _ => {
                    assert!(prompt.contains("between dbr:Quentin_Tarantino and dbr:Christoph_Waltz"), "{prompt}");
                    assert!(prompt.ends_with("Context: Waltz starred in Django Unchained."));
                    "dbr:Quentin_Tarantino, dbo:director, dbr:Django_Unchained".to_string()
                }
            })
        });
        let trace = run_multi_step(
            &cpg(),
            &client,
            &TemplateSet::embedded(),
            &RequestTemplate::new("m"),
            0,
        )
        .unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(trace.exchanges.len(), 3);
        assert!(trace.failure.is_none());
        assert!(trace.final_text.unwrap().starts_with("dbr:Quentin_Tarantino"));
    }

    #[test]
    fn multi_step_stops_on_failed_linking() {
        let client = FnClient::new(|req: &LlmRequest, _| {
            let prompt = req.last_user_prompt().unwrap();
            Ok(if prompt.starts_with("Instruction:") { "Some sentence." } else { "I cannot link these." }.to_string())
        });
        let trace = run_multi_step(&cpg(), &client, &TemplateSet::embedded(), &RequestTemplate::new("m"), 0).unwrap();
        assert_eq!(trace.exchanges.len(), 2);
        assert!(trace.final_text.is_none());
        assert!(trace.failure.is_some());
    }

    #[test]
    fn multi_step_stops_on_empty_support() {
        let client = FnClient::new(|_: &LlmRequest, _| Ok("   ".to_string()));
        let trace = run_multi_step(&cpg(), &client, &TemplateSet::embedded(), &RequestTemplate::new("m"), 0).unwrap();
        assert_eq!(trace.exchanges.len(), 1);
        assert!(trace.failure.is_some());
    }
}
