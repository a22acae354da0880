use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use kgreason::eval::{read_records, run_model, shortest_path_baseline, write_records, ModelRun, RunContext, RunRecord};
use kgreason::llm::{write_atomic, CachedClient, ChatClient, HttpBackend, LlmError, RequestTemplate, ResponseCache, RetryPolicy, ScriptedClient};
use kgreason::metrics::{aggregate, unresolved_items};
use kgreason::tasks::{load_tasks, make_masked_queries, sample_per_document, sample_triples, write_tasks, write_triples};
use kgreason::{load_snapshot, LabelStore, MetricReport, Query, Snapshot, Strategy, TaskKind, TemplateSet};

use crate::config::{ModelConfig, RunConfig};
use crate::{Format, MakeTasksArgs, ReportArgs, RunArgs, ScoreArgs, SnapshotArgs};

/// Bad invocation or configuration.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Some generations failed at the endpoint.
#[derive(Debug)]
struct EndpointFailures(usize);

impl fmt::Display for EndpointFailures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} generation(s) failed at the endpoint", self.0)
    }
}

impl std::error::Error for EndpointFailures {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(message.into()))
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if cause.is::<EndpointFailures>() || cause.is::<LlmError>() {
            return 3;
        }
        if let Some(kgreason::Error::Llm(_)) = cause.downcast_ref::<kgreason::Error>() {
            return 3;
        }
    }
    2
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Option<RunConfig>> {
    let Some(path) = path else { return Ok(None) };
    let config = RunConfig::load(path).map_err(|e| usage(format!("{e:#}")))?;
    Ok(Some(config))
}

fn config_base(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn snapshot_paths(config: Option<&Path>, args: &SnapshotArgs) -> anyhow::Result<(PathBuf, PathBuf)> {
    let from_config = load_config(config)?.map(|c| c.resolve_paths(&config_base(config.unwrap())).snapshot);
    let kg = args.kg.clone().or_else(|| from_config.as_ref().map(|s| s.kg.clone()));
    let ontology = args.ontology.clone().or_else(|| from_config.as_ref().map(|s| s.ontology.clone()));
    match (kg, ontology) {
        (Some(kg), Some(ontology)) => Ok((kg, ontology)),
        _ => Err(usage("need --kg and --ontology (or a --config with a [snapshot] section)")),
    }
}

fn load(kg: &Path, ontology: &Path) -> anyhow::Result<Snapshot> {
    load_snapshot(kg, ontology).context("loading snapshot")
}

pub fn ingest(config: Option<&Path>, args: &SnapshotArgs) -> anyhow::Result<()> {
    let (kg, ontology) = snapshot_paths(config, args)?;
    let snapshot = load(&kg, &ontology)?;
    println!("{}", snapshot.stats());
    Ok(())
}

fn write_jsonl_tasks(path: &Path, queries: &[Query]) -> anyhow::Result<()> {
    write_tasks(path, queries).with_context(|| format!("writing {}", path.display()))
}

pub fn make_tasks(config: Option<&Path>, args: &MakeTasksArgs) -> anyhow::Result<()> {
    let seed = match args.seed {
        Some(seed) => seed,
        None => load_config(config)?
            .and_then(|c| c.seed)
            .ok_or_else(|| usage("sampling needs a seed: pass --seed or set seed in the config"))?,
    };
    let (kg, ontology) = snapshot_paths(config, &args.snapshot)?;
    let snapshot = load(&kg, &ontology)?;
    let triples = sample_triples(&snapshot.graph, args.n, seed)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut sample = Vec::new();
    write_triples(&mut sample, &triples)?;
    write_atomic(&args.out.join("sample.nt"), &sample)?;
    for kind in [TaskKind::TailPrediction, TaskKind::RelationPrediction] {
        let queries = make_masked_queries(&triples, kind)?;
        let path = args.out.join(format!("{}.jsonl", kind.short_name()));
        write_jsonl_tasks(&path, &queries)?;
        println!("{} {} queries -> {}", queries.len(), kind, path.display());
    }
    if let Some(contextual) = &args.contextual {
        let loaded = kgreason::tasks::load_contextual_dataset(contextual, &snapshot.graph, &snapshot.ontology)?;
        for rejected in &loaded.rejected {
            eprintln!("rejected {rejected}");
        }
        let queries = match args.per_document {
            Some(k) => sample_per_document(&loaded.queries, k, seed),
            None => loaded.queries,
        };
        let path = args.out.join("contextual.jsonl");
        write_jsonl_tasks(&path, &queries)?;
        println!(
            "{} contextual queries -> {} ({} rejected)",
            queries.len(),
            path.display(),
            loaded.rejected.len()
        );
    }
    Ok(())
}

fn load_queries(snapshot: &Snapshot, files: &[PathBuf]) -> anyhow::Result<Vec<Query>> {
    if files.is_empty() {
        return Err(usage("no task files given"));
    }
    let mut queries = Vec::new();
    let mut ids = BTreeSet::new();
    for file in files {
        let loaded = load_tasks(file, &snapshot.graph, &snapshot.ontology)?;
        for rejected in &loaded.rejected {
            eprintln!("{}: rejected {rejected}", file.display());
        }
        for query in loaded.queries {
            if !ids.insert(query.id.clone()) {
                return Err(anyhow!("query id {} appears in more than one task file", query.id));
            }
            queries.push(query);
        }
    }
    Ok(queries)
}

fn backend(model: &ModelConfig) -> anyhow::Result<Box<dyn ChatClient>> {
    match (&model.endpoint, &model.script) {
        (Some(url), _) => {
            let retry = RetryPolicy {
                max_attempts: model.max_attempts,
                ..RetryPolicy::default()
            };
            Ok(Box::new(HttpBackend::from_env(
                url.clone(),
                Duration::from_secs(model.timeout_secs),
                retry,
            )))
        }
        (None, Some(script)) => Ok(Box::new(ScriptedClient::from_file(script)?)),
        (None, None) => Err(usage(format!("model {:?} has no endpoint or script", model.name))),
    }
}

pub fn run(config_path: Option<&Path>, args: &RunArgs, only: Option<Strategy>) -> anyhow::Result<()> {
    let path = config_path.ok_or_else(|| usage("run needs --config"))?;
    let mut config = load_config(Some(path))?.unwrap();
    if let Some(trials) = args.trials {
        config.trials.relation = trials;
        config.trials.path = trials;
    }
    if let Some(n) = args.max_in_flight {
        config.max_in_flight = n;
    }
    if let Some(dir) = &args.cache_dir {
        config.cache_dir = dir.clone();
    }
    if let Some(strategy) = only {
        for model in &mut config.models {
            model.strategies = vec![strategy];
        }
    }
    if let Some(name) = &args.model {
        config.models.retain(|m| &m.name == name);
        if config.models.is_empty() {
            return Err(usage(format!("no model named {name:?} in the config")));
        }
    }
    config.validate().map_err(|e| usage(format!("{e:#}")))?;
    let config_hash = config.hash()?;
    let config = config.resolve_paths(&config_base(path));

    let snapshot = load(&config.snapshot.kg, &config.snapshot.ontology)?;
    let mut queries = load_queries(&snapshot, &config.tasks)?;
    if only.is_some() {
        queries.retain(|q| q.kind.is_path_task());
    }
    let templates = match &config.prompts {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::embedded(),
    };
    let (path_queries, answer_queries): (Vec<Query>, Vec<Query>) =
        queries.into_iter().partition(|q| q.kind.is_path_task());

    let mut records: Vec<RunRecord> = Vec::new();
    let mut failures = 0;
    for model in &config.models {
        let cache = ResponseCache::open(&config.cache_dir)?;
        let client = if args.replay {
            CachedClient::replay(&model.name, cache)
        } else {
            CachedClient::new(&model.name, cache, backend(model)?)
        };
        let request = RequestTemplate {
            model: model.model.clone().unwrap_or_else(|| model.name.clone()),
            temperature: model.temperature,
            max_tokens: model.max_tokens,
            system: model.system.clone(),
        };
        for &strategy in &model.strategies {
            log::info!("running {} with {}", model.name, strategy);
            let run = ModelRun {
                name: model.name.clone(),
                strategy,
                request: request.clone(),
                client: &client,
            };
            for (group, trials) in [(&answer_queries, config.trials.relation), (&path_queries, config.trials.path)] {
                let ctx = RunContext {
                    snapshot: &snapshot,
                    templates: &templates,
                    config_hash: config_hash.clone(),
                    trials,
                    max_in_flight: config.max_in_flight,
                };
                let outcome = run_model(&ctx, &run, group)?;
                for failure in &outcome.failures {
                    eprintln!(
                        "{} {} {} trial {}: {}",
                        model.name, strategy, failure.query_id, failure.trial, failure.error
                    );
                }
                failures += outcome.failures.len();
                records.extend(outcome.records);
            }
        }
    }
    let out = args.out.clone().unwrap_or_else(|| config.output_dir.join("records.jsonl"));
    write_records(&out, &records)?;
    println!("{} run records -> {}", records.len(), out.display());
    if failures > 0 {
        return Err(anyhow::Error::new(EndpointFailures(failures)));
    }
    Ok(())
}

fn read_all_records(files: &[PathBuf]) -> anyhow::Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for file in files {
        records.extend(read_records(file)?);
    }
    Ok(records)
}

fn load_labels(path: Option<&Path>) -> anyhow::Result<LabelStore> {
    match path {
        Some(path) => Ok(LabelStore::load(path)?),
        None => Ok(LabelStore::new()),
    }
}

pub fn score(args: &ScoreArgs) -> anyhow::Result<()> {
    let records = read_all_records(&args.records)?;
    let labels = load_labels(args.labels.as_deref())?;
    let report = aggregate(&records, &labels);
    if let Some(out) = &args.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(out, json.as_bytes())?;
    }
    print!("{}", report.render_table());
    Ok(())
}

pub fn report(args: &ReportArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.scores).with_context(|| format!("reading {}", args.scores.display()))?;
    let report: MetricReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.scores.display()))?;
    let rendered = match args.format {
        Format::Table => report.render_table(),
        Format::Csv => report.render_csv(),
    };
    match &args.out {
        Some(out) => write_atomic(out, rendered.as_bytes())?,
        None => print!("{rendered}"),
    }
    Ok(())
}

pub fn label_export(records: &[PathBuf], labels: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let records = read_all_records(records)?;
    let labels = load_labels(labels.filter(|p| p.exists()))?;
    let items = unresolved_items(&records, &labels);
    let text: String = items.iter().map(|(q, a)| format!("{q}\t{a}\t\n")).collect();
    write_atomic(out, text.as_bytes())?;
    println!("{} unresolved item(s) -> {}", items.len(), out.display());
    Ok(())
}

pub fn label_import(input: &Path, labels: &Path) -> anyhow::Result<()> {
    let incoming = LabelStore::load(input)?;
    let mut store = if labels.exists() {
        LabelStore::load(labels)?
    } else {
        LabelStore::new()
    };
    let before = store.len();
    store.merge(&incoming)?;
    store.save(labels)?;
    println!(
        "{} label(s) read, {} new, {} total -> {}",
        incoming.len(),
        store.len() - before,
        store.len(),
        labels.display()
    );
    Ok(())
}

pub fn shortest_path(config_path: Option<&Path>, snapshot_args: &SnapshotArgs, tasks: &[PathBuf], out: &Path) -> anyhow::Result<()> {
    let (kg, ontology) = snapshot_paths(config_path, snapshot_args)?;
    let (tasks, hash) = match (tasks.is_empty(), config_path) {
        (false, _) => (tasks.to_vec(), String::new()),
        (true, Some(path)) => {
            let config = load_config(Some(path))?.unwrap();
            let hash = config.hash()?;
            (config.resolve_paths(&config_base(path)).tasks, hash)
        }
        (true, None) => return Err(usage("need --tasks or a --config listing task files")),
    };
    let snapshot = load(&kg, &ontology)?;
    let queries = load_queries(&snapshot, &tasks)?;
    let records = shortest_path_baseline(&snapshot, &queries, &hash)?;
    write_records(out, &records)?;
    print!("{}", aggregate(&records, &LabelStore::new()).render_table());
    Ok(())
}
