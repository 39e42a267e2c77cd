//! Official challenge metrics (MSE, LCC, SRCC, KTAU), utterance- and
//! system-level aggregation, and report rendering.

mod aggregate;
mod correlation;
mod report;

pub use aggregate::{aggregate, AggregateGroup, Level, ScoredRecord};
pub use correlation::{average_ranks, ktau, mse, pcc, srcc};
pub use report::{
    evaluate_records, render_report, MetricReport, MetricRow, ReportFormat, REPORT_HEADER,
};
