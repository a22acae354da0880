use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::{Evaluation, RunRecord, SHORTEST_PATH_METHOD};
use crate::hallucination::Verdict;
use crate::tasks::TaskKind;

use super::accuracy::{soft_accuracy, SoftOutcome};
use super::labels::LabelStore;

pub const CSV_HEADER: &str = "model,task,H-ACC,S-ACC,NGEO,%IF,%IV,trials,unresolved";

/// One (model, task) line of a report. Accuracies are percentages; NGEO,
/// %IF and %IV are fractions. Columns that do not apply are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub task: TaskKind,
    pub generations: usize,
    pub h_acc: Option<f64>,
    pub s_acc: Option<f64>,
    pub ngeo: Option<f64>,
    pub pct_if: Option<f64>,
    pub pct_iv: Option<f64>,
    pub trials: usize,
    /// Answers (or content-suspect path hops) without a label.
    pub unresolved: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

#[derive(Default)]
struct Accumulator {
    generations: usize,
    trials: BTreeSet<u32>,
    hard: usize,
    soft: usize,
    unresolved: usize,
    answers: usize,
    paths: usize,
    ngeo_sum: f64,
    ill_formatted: usize,
    well_formed: usize,
    iv_sum: f64,
    baseline: bool,
}

fn mean(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

/// Folds run records into one row per (`model/method`, task), rows sorted
/// by model then task.
pub fn aggregate(records: &[RunRecord], labels: &LabelStore) -> MetricReport {
    let mut groups: BTreeMap<(String, TaskKind), Accumulator> = BTreeMap::new();
    for record in records {
        let acc = groups
            .entry((format!("{}/{}", record.model, record.method), record.task))
            .or_default();
        acc.generations += 1;
        acc.trials.insert(record.trial);
        acc.baseline |= record.method == SHORTEST_PATH_METHOD;
        match &record.evaluation {
            Evaluation::Answer(answer) => {
                acc.answers += 1;
                acc.hard += usize::from(answer.hard);
                match soft_accuracy(answer, &record.query_id, labels) {
                    SoftOutcome::True => acc.soft += 1,
                    SoftOutcome::False => {}
                    SoftOutcome::Unresolved => acc.unresolved += 1,
                }
            }
            Evaluation::Path(path) => {
                acc.paths += 1;
                acc.ngeo_sum += path.ngeo;
                match path.invalid_fraction {
                    Some(fraction) if path.path.is_some() => {
                        acc.well_formed += 1;
                        acc.iv_sum += fraction;
                    }
                    _ => {}
                }
                if path.path.is_none() {
                    acc.ill_formatted += 1;
                }
                for hop in &path.hop_verdicts {
                    let label = labels.get(&record.query_id, &hop.triple.to_string());
                    let verdict = match label {
                        Some(label) => hop.verdict.clone().merge_label(label),
                        None => hop.verdict.clone(),
                    };
                    acc.unresolved += usize::from(verdict == Verdict::ContentSuspect);
                }
            }
        }
    }
    let rows = groups
        .into_iter()
        .map(|((model, task), acc)| {
            let percent = |n: usize| mean(100.0 * n as f64, acc.answers);
            let structural = !acc.baseline && acc.paths > 0;
            MetricRow {
                model,
                task,
                generations: acc.generations,
                h_acc: percent(acc.hard),
                s_acc: percent(acc.soft),
                ngeo: mean(acc.ngeo_sum, acc.paths),
                pct_if: if structural { mean(acc.ill_formatted as f64, acc.paths) } else { None },
                pct_iv: if structural { mean(acc.iv_sum, acc.well_formed) } else { None },
                trials: acc.trials.len(),
                unresolved: acc.unresolved,
            }
        })
        .collect();
    MetricReport { rows }
}

fn cell(value: Option<f64>, decimals: usize, missing: &str) -> String {
    match value {
        Some(v) => format!("{v:.decimals$}"),
        None => missing.to_string(),
    }
}

impl MetricReport {
    fn cells(row: &MetricRow, table: bool) -> [String; 9] {
        let (pct, frac, missing) = if table { (1, 2, "-") } else { (4, 4, "") };
        [
            row.model.clone(),
            row.task.short_name().to_string(),
            cell(row.h_acc, pct, missing),
            cell(row.s_acc, pct, missing),
            cell(row.ngeo, frac, missing),
            cell(row.pct_if, frac, missing),
            cell(row.pct_iv, frac, missing),
            row.trials.to_string(),
            row.unresolved.to_string(),
        ]
    }

    /// Aligned plain-text table: text columns left-aligned, numbers right-aligned.
    pub fn render_table(&self) -> String {
        let header: Vec<String> = CSV_HEADER.split(',').map(str::to_string).collect();
        let body: Vec<[String; 9]> = self.rows.iter().map(|r| Self::cells(r, true)).collect();
        let mut widths: Vec<usize> = header.iter().map(String::len).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let formatted: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            writeln!(out, "{}", formatted.join("  ").trim_end()).unwrap();
        };
        line(&header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&rule);
        for row in &body {
            line(row);
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let mut cells = Self::cells(row, false);
            if cells[0].contains([',', '"', '\n']) {
                cells[0] = format!("\"{}\"", cells[0].replace('"', "\"\""));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
