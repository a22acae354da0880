use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kgreason::eval::build_script;
use kgreason::llm::ScriptLine;
use kgreason::tasks::load_tasks;
use kgreason::{load_snapshot, Query, Strategy, TemplateSet};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn kgr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgr"))
        .args(args)
        .env_remove("KGR_API_KEY")
        .output()
        .expect("spawn kgr")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mock_answer(q: &Query) -> String {
    match q.id.as_str() {
        "cpg-winslet-reading" => {
            "dbr:Kate_Winslet - dbo:spouse - dbr:Jamie_Foxx - dbo:birthPlace - dbr:Reading,_Berkshire".into()
        }
        "cpg-foxx-waltz" => {
            "dbr:Jamie_Foxx, dbo:birthPlace, dbr:Reading,_Berkshire, dbo:location, dbr:Christoph_Waltz".into()
        }
        "cpg-pitt-hill" => "dbr:Brad_Pitt - dbr:Moneyball_(film) - dbr:Jonah_Hill".into(),
        "cpg-hanks-goetzman" => {
            "dbr:Tom_Hanks, dbo:founders, dbr:Playtone\ndbr:Playtone, dbo:keyPerson, dbr:Gary_Goetzman".into()
        }
        "re-playtone" => "dbr:Playtone, dbo:owner, dbr:Tom_Hanks".into(),
        _ => q.ground_truth.render(),
    }
}

fn mock_script() -> String {
    let f = fixtures();
    let snap = load_snapshot(&f.join("kg.nt"), &f.join("ontology.nt")).unwrap();
    let queries = load_tasks(&f.join("tasks/contextual.jsonl"), &snap.graph, &snap.ontology)
        .unwrap()
        .queries;
    let templates = TemplateSet::embedded();
    let mut lines: Vec<ScriptLine> = Vec::new();
    for strategy in Strategy::ALL {
        lines.extend(build_script(&queries, strategy, &templates, mock_answer).unwrap().to_lines());
    }
    lines.sort_by(|a, b| a.prompt_sha256.cmp(&b.prompt_sha256));
    lines.dedup_by(|a, b| a.prompt_sha256 == b.prompt_sha256);
    lines
        .iter()
        .map(|l| serde_json::to_string(l).unwrap() + "\n")
        .collect()
}

/// Compares `actual` with a committed file; `KGR_BLESS=1` rewrites it.
fn golden(path: &Path, actual: &str) {
    if std::env::var_os("KGR_BLESS").is_some() {
        fs::write(path, actual).unwrap();
    }
    let expected = fs::read_to_string(path).unwrap_or_default();
    assert_eq!(actual, expected, "{} is stale; rerun with KGR_BLESS=1", path.display());
}

#[test]
fn mock_script_matches_templates() {
    golden(&fixtures().join("mock/script.jsonl"), &mock_script());
}

#[test]
fn exit_codes() {
    assert_eq!(code(&kgr(&["--help"])), 0);
    assert_eq!(code(&kgr(&["--version"])), 0);
    assert_eq!(code(&kgr(&["frobnicate"])), 1);
    assert_eq!(code(&kgr(&["ingest"])), 1);
    assert_eq!(code(&kgr(&["ingest", "--kg", "/nonexistent.nt", "--ontology", "/nonexistent.nt"])), 2);

    let f = fixtures();
    let dir = tempfile::tempdir().unwrap();
    let no_seed = kgr(&[
        "make-tasks", "--kg", s(&f.join("kg.nt")), "--ontology", s(&f.join("ontology.nt")),
        "--n", "5", "--out", s(dir.path()),
    ]);
    assert_eq!(code(&no_seed), 1);

    let config = dir.path().join("dup.toml");
    fs::write(
        &config,
        "tasks = []\n[snapshot]\nkg = \"a\"\nontology = \"b\"\n\
         [[models]]\nname = \"m\"\nscript = \"s\"\nstrategies = [\"single-step\"]\n\
         [[models]]\nname = \"m\"\nscript = \"s\"\nstrategies = [\"single-step\"]\n",
    )
    .unwrap();
    assert_eq!(code(&kgr(&["run", "--config", s(&config)])), 1);
    fs::write(&config, "bogus_key = 1\n").unwrap();
    assert_eq!(code(&kgr(&["run", "--config", s(&config)])), 1);
}

#[test]
fn ingest_prints_stats() {
    let f = fixtures();
    let out = kgr(&["ingest", "--kg", s(&f.join("kg.nt")), "--ontology", s(&f.join("ontology.nt"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("triples            38"), "{}", stdout(&out));
}

#[test]
fn make_tasks_is_seed_stable() {
    let f = fixtures();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out = kgr(&[
            "make-tasks", "--kg", s(&f.join("kg.nt")), "--ontology", s(&f.join("ontology.nt")),
            "--n", "8", "--seed", "7", "--out", s(dir.path()),
            "--contextual", s(&f.join("tasks/contextual.jsonl")), "--per-document", "1",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["tail.jsonl", "relation.jsonl", "sample.nt", "contextual.jsonl"] {
        let a = fs::read_to_string(dirs[0].path().join(name)).unwrap();
        let b = fs::read_to_string(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
        assert!(!a.is_empty(), "{name}");
    }
    let sample = fs::read_to_string(dirs[0].path().join("sample.nt")).unwrap();
    assert_eq!(sample.lines().count(), 8);
}

#[test]
fn mock_run_is_reproducible_and_matches_golden_report() {
    let f = fixtures();
    let config = f.join("mock/run.toml");
    let work = tempfile::tempdir().unwrap();
    let cache = work.path().join("cache");
    let mut outputs = Vec::new();
    for (name, extra) in [("a", None), ("b", None), ("c", Some("--replay"))] {
        let records = work.path().join(format!("{name}.jsonl"));
        let mut args = vec!["run", "--config", s(&config), "--cache-dir", s(&cache), "--out", s(&records)];
        args.extend(extra);
        let out = kgr(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(fs::read_to_string(&records).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let scores = work.path().join("scores.json");
    let out = kgr(&[
        "score", "--records", s(&work.path().join("a.jsonl")),
        "--labels", s(&f.join("mock/labels.tsv")), "--out", s(&scores),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    golden(&f.join("mock/report.txt"), &stdout(&out));

    let csv = kgr(&["report", "--scores", s(&scores), "--format", "csv"]);
    assert_eq!(code(&csv), 0);
    golden(&f.join("mock/report.csv"), &stdout(&csv));
}

#[test]
fn replay_miss_is_an_endpoint_error() {
    let f = fixtures();
    let work = tempfile::tempdir().unwrap();
    let out = kgr(&[
        "run", "--config", s(&f.join("mock/run.toml")), "--replay",
        "--cache-dir", s(&work.path().join("empty")), "--out", s(&work.path().join("r.jsonl")),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn unreachable_endpoint_exits_3() {
    let f = fixtures();
    let work = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let config = work.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "tasks = [{tasks:?}]\n[snapshot]\nkg = {kg:?}\nontology = {onto:?}\n\
             [trials]\nrelation = 1\npath = 1\n\
             [[models]]\nname = \"down\"\nendpoint = \"http://127.0.0.1:{port}/v1/chat/completions\"\n\
             strategies = [\"single-step\"]\nmax_attempts = 1\ntimeout_secs = 5\n",
            tasks = s(&f.join("chain/tasks.jsonl")),
            kg = s(&f.join("chain/kg.nt")),
            onto = s(&f.join("chain/ontology.nt")),
        ),
    )
    .unwrap();
    let records = work.path().join("r.jsonl");
    let out = kgr(&[
        "run", "--config", s(&config), "--cache-dir", s(&work.path().join("cache")), "--out", s(&records),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(records.exists());
}

#[test]
fn shortest_path_baseline_on_chain() {
    let f = fixtures().join("chain");
    let work = tempfile::tempdir().unwrap();
    let records = work.path().join("baseline.jsonl");
    let out = kgr(&[
        "baseline", "shortest-path", "--kg", s(&f.join("kg.nt")), "--ontology", s(&f.join("ontology.nt")),
        "--tasks", s(&f.join("tasks.jsonl")), "--out", s(&records),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let scores = work.path().join("scores.json");
    assert_eq!(code(&kgr(&["score", "--records", s(&records), "--out", s(&scores)])), 0);
    let csv = stdout(&kgr(&["report", "--scores", s(&scores), "--format", "csv"]));
    assert_eq!(
        csv,
        "model,task,H-ACC,S-ACC,NGEO,%IF,%IV,trials,unresolved\n\
         baseline/shortest-path,cpg,,,0.4643,,,1,0\n"
    );
}

#[test]
fn label_round_trip() {
    let f = fixtures();
    let work = tempfile::tempdir().unwrap();
    let records = work.path().join("r.jsonl");
    let out = kgr(&[
        "run", "--config", s(&f.join("mock/run.toml")), "--cache-dir", s(&work.path().join("cache")),
        "--out", s(&records), "--trials", "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let pending = work.path().join("pending.tsv");
    assert_eq!(code(&kgr(&["label", "export", "--records", s(&records), "--out", s(&pending)])), 0);
    let text = fs::read_to_string(&pending).unwrap();
    let items: Vec<&str> = text.lines().collect();
    assert!(!items.is_empty());
    assert!(items.iter().all(|l| l.ends_with('\t') && l.split('\t').count() == 3));

    let filled: String = items.iter().take(2).map(|l| format!("{l}IncorrectFact\n")).collect();
    let filled = filled + &items[2..].join("\n") + "\n";
    fs::write(&pending, filled).unwrap();
    let store = work.path().join("labels.tsv");
    let out = kgr(&["label", "import", "--input", s(&pending), "--labels", s(&store)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&store).unwrap().lines().count(), 2);

    let again = work.path().join("again.tsv");
    let out = kgr(&[
        "label", "export", "--records", s(&records), "--labels", s(&store), "--out", s(&again),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(&again).unwrap().lines().count(), items.len() - 2);

    let clash: String = items.iter().take(1).map(|l| format!("{l}CorrectFact\n")).collect();
    fs::write(&pending, clash).unwrap();
    assert_eq!(code(&kgr(&["label", "import", "--input", s(&pending), "--labels", s(&store)])), 2);
}
