//! Running strategies over query sets and recording what happened.
//!
//! Every generation becomes one [`RunRecord`] holding the prompt hashes and
//! cache keys of its requests, the raw responses and the evaluation, so
//! metrics can be recomputed from records alone.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hallucination::{check_path, invalid_fraction, RelationVerdict};
use crate::kg::Snapshot;
use crate::llm::{parallel_map, ChatClient, LlmError, RequestTemplate, ScriptedClient};
use crate::metrics::{evaluate_answer, ngeo, AnswerEvaluation, EditCostModel};
use crate::path::{extract_paths, judge_generation, KgPath, ParseOutcome, ReasonCode};
use crate::prompting::{exchange, run_multi_step, Exchange, Step, Strategy, TemplateSet};
use crate::tasks::{Query, TaskKind};

pub const SHORTEST_PATH_METHOD: &str = "shortest-path";
pub const BASELINE_MODEL: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub method: String,
    pub task: TaskKind,
    pub query_id: String,
    pub trial: u32,
    pub config_hash: String,
    pub exchanges: Vec<Exchange>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Evaluation {
    Answer(AnswerEvaluation),
    Path(PathEvaluation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEvaluation {
    /// `WellFormed`, `IllFormatted` or `MultiplePaths`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<ReasonCode>,
    /// Path-like spans found in the response.
    pub candidates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<KgPath>,
    pub ngeo: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hop_verdicts: Vec<RelationVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn score_path(snapshot: &Snapshot, query: &Query, outcome: ParseOutcome, candidates: usize, warnings: Vec<String>) -> Result<PathEvaluation> {
    let truth = query.ground_truth.path().ok_or_else(|| {
        Error::InvalidInput(format!("query {} has no ground-truth path", query.id))
    })?;
    let cost = EditCostModel::new(&snapshot.ontology);
    let path = outcome.path().cloned();
    let hop_verdicts = match &path {
        Some(p) => check_path(&snapshot.ontology, &snapshot.graph, p)?,
        None => Vec::new(),
    };
    Ok(PathEvaluation {
        status: outcome.status_tag().to_string(),
        reason: match outcome {
            ParseOutcome::IllFormatted(reason) => Some(reason),
            _ => None,
        },
        candidates,
        ngeo: ngeo(path.as_ref(), truth, &cost),
        invalid_fraction: (!hop_verdicts.is_empty()).then(|| invalid_fraction(&hop_verdicts)),
        path,
        hop_verdicts,
        warnings,
    })
}

/// Parses and scores a path generation. `None` stands for a pipeline that
/// produced no final answer; it is scored as ill-formatted empty input.
pub fn evaluate_path(snapshot: &Snapshot, query: &Query, text: Option<&str>, mut warnings: Vec<String>) -> Result<PathEvaluation> {
    let Some(text) = text else {
        return score_path(snapshot, query, ParseOutcome::IllFormatted(ReasonCode::EmptyInput), 0, warnings);
    };
    let candidates = extract_paths(text);
    let judgment = judge_generation(&candidates);
    warnings.extend(judgment.warnings);
    score_path(snapshot, query, judgment.outcome, candidates.len(), warnings)
}

pub fn evaluate(snapshot: &Snapshot, query: &Query, text: Option<&str>, warnings: Vec<String>) -> Result<Evaluation> {
    if query.kind.is_path_task() {
        return Ok(Evaluation::Path(evaluate_path(snapshot, query, text, warnings)?));
    }
    let answer = evaluate_answer(&snapshot.graph, &snapshot.ontology, query, text.unwrap_or(""))?;
    Ok(Evaluation::Answer(answer))
}

/// Inputs shared by every generation of a run.
pub struct RunContext<'a> {
    pub snapshot: &'a Snapshot,
    pub templates: &'a TemplateSet,
    pub config_hash: String,
    pub trials: u32,
    pub max_in_flight: usize,
}

/// One model endpoint driven with one strategy.
pub struct ModelRun<'a> {
    pub name: String,
    pub strategy: Strategy,
    pub request: RequestTemplate,
    pub client: &'a dyn ChatClient,
}

#[derive(Debug)]
pub struct EndpointFailure {
    pub query_id: String,
    pub trial: u32,
    pub error: LlmError,
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<EndpointFailure>,
    /// Queries the strategy does not apply to.
    pub skipped: usize,
}

fn generate(ctx: &RunContext, run: &ModelRun, query: &Query, trial: u32) -> Result<RunRecord> {
    let (exchanges, text, warnings) = match run.strategy {
        Strategy::MultiStep => {
            let trace = run_multi_step(query, run.client, ctx.templates, &run.request, trial)?;
            let mut warnings = trace.warnings;
            warnings.extend(trace.failure);
            (trace.exchanges, trace.final_text, warnings)
        }
        strategy => {
            let prompt = ctx.templates.render(query, strategy)?;
            let ex = exchange(run.client, &run.request, "answer", &prompt, trial)?;
            let text = ex.response.clone();
            (vec![ex], Some(text), Vec::new())
        }
    };
    Ok(RunRecord {
        model: run.name.clone(),
        method: run.strategy.as_str().to_string(),
        task: query.kind,
        query_id: query.id.clone(),
        trial,
        config_hash: ctx.config_hash.clone(),
        exchanges,
        evaluation: evaluate(ctx.snapshot, query, text.as_deref(), warnings)?,
    })
}

/// Runs every applicable query for `ctx.trials` trials. Records come back in
/// query order, then trial order, regardless of completion order. Endpoint
/// errors are collected per generation; any other error aborts the run.
pub fn run_model(ctx: &RunContext, run: &ModelRun, queries: &[Query]) -> Result<RunOutcome> {
    let applicable: Vec<&Query> = queries
        .iter()
        .filter(|q| run.strategy.supports(q.kind))
        .collect();
    let work: Vec<(&Query, u32)> = applicable
        .iter()
        .flat_map(|q| (0..ctx.trials).map(move |t| (*q, t)))
        .collect();
    let results = parallel_map(&work, ctx.max_in_flight.max(1), |_, (query, trial)| {
        generate(ctx, run, query, *trial)
    });
    let mut outcome = RunOutcome {
        skipped: queries.len() - applicable.len(),
        ..RunOutcome::default()
    };
    for ((query, trial), result) in work.iter().zip(results) {
        match result {
            Ok(record) => outcome.records.push(record),
            Err(Error::Llm(error)) => outcome.failures.push(EndpointFailure {
                query_id: query.id.clone(),
                trial: *trial,
                error,
            }),
            Err(other) => return Err(other),
        }
    }
    Ok(outcome)
}

/// Shortest path between head and tail in the graph, scored against the
/// ground truth. No endpoint is involved.
pub fn shortest_path_baseline(snapshot: &Snapshot, queries: &[Query], config_hash: &str) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for query in queries.iter().filter(|q| q.kind.is_path_task()) {
        let tail = query.tail.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("query {} has no tail entity", query.id))
        })?;
        let evaluation = match snapshot.graph.shortest_path(&query.head, tail) {
            Ok(path) => score_path(snapshot, query, ParseOutcome::WellFormed(path), 1, Vec::new())?,
            Err(Error::NoPath(..) | Error::UnknownEntity(_)) => score_path(
                snapshot,
                query,
                ParseOutcome::IllFormatted(ReasonCode::EmptyInput),
                0,
                vec![format!("no path between {} and {tail}", query.head)],
            )?,
            Err(other) => return Err(other),
        };
        records.push(RunRecord {
            model: BASELINE_MODEL.to_string(),
            method: SHORTEST_PATH_METHOD.to_string(),
            task: query.kind,
            query_id: query.id.clone(),
            trial: 0,
            config_hash: config_hash.to_string(),
            exchanges: Vec::new(),
            evaluation: Evaluation::Path(evaluation),
        });
    }
    Ok(records)
}

/// Scripted endpoint answering each query's final prompt with `answer(query)`.
/// For multi-step runs the intermediate steps are answered with the context
/// and with the head and tail IRIs.
pub fn build_script(
    queries: &[Query],
    strategy: Strategy,
    templates: &TemplateSet,
    answer: impl Fn(&Query) -> String,
) -> Result<ScriptedClient> {
    let mut script = ScriptedClient::new();
    for query in queries.iter().filter(|q| strategy.supports(q.kind)) {
        if strategy != Strategy::MultiStep {
            script.insert(&templates.render(query, strategy)?, answer(query));
            continue;
        }
        let tail = query.tail.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("query {} has no tail entity", query.id))
        })?;
        let support = query.context.as_deref().unwrap_or_default().trim();
        script.insert(&templates.render_step(query, Step::SupportSentences)?, support);
        script.insert(
            &templates.render_step(query, Step::EntityLinking { support_sentences: support })?,
            format!("{}\n{}", query.head, tail),
        );
        let last = Step::PathGeneration {
            support_sentences: support,
            head: &query.head,
            tail,
        };
        script.insert(&templates.render_step(query, last)?, answer(query));
    }
    Ok(script)
}

/// Scripted endpoint that always answers with the ground truth.
pub fn echo_ground_truth(queries: &[Query], strategy: Strategy, templates: &TemplateSet) -> Result<ScriptedClient> {
    build_script(queries, strategy, templates, |q| q.ground_truth.render())
}

pub fn records_to_jsonl(records: &[RunRecord]) -> Result<String> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    crate::llm::write_atomic(path, records_to_jsonl(records)?.as_bytes())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Number of content-suspect hops per query over a record set.
pub fn content_suspects(records: &[RunRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for record in records {
        if let Evaluation::Path(p) = &record.evaluation {
            let n = p
                .hop_verdicts
                .iter()
                .filter(|v| v.verdict == crate::hallucination::Verdict::ContentSuspect)
                .count();
            *out.entry(record.query_id.clone()).or_insert(0) += n;
        }
    }
    out
}
