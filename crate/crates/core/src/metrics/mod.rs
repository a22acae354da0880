//! Path edit distance, hard/soft accuracy, human labels and report tables.

mod accuracy;
mod geo;
mod labels;
mod report;

pub use accuracy::{evaluate_answer, hard_accuracy, parse_answer, soft_accuracy, AnswerEvaluation, SoftOutcome};
pub use geo::{geo, geo_elements, ngeo, EditCostModel, DELETE_COST, INSERT_COST};
pub use labels::{unresolved_items, FactLabel, LabelStore};
pub use report::{aggregate, MetricReport, MetricRow};
