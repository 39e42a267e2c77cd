use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::axis::{Axis, Domain};
use crate::error::{AesaError, Result};
use crate::metrics::aggregate::{aggregate, Level, ScoredRecord};
use crate::metrics::correlation::{ktau, mse, pcc, srcc};

pub const REPORT_HEADER: &str = "domain,axis,mse,lcc,srcc,ktau";
/// Row order of rendered tables.
const AXIS_ORDER: [Axis; 4] = [Axis::PQ, Axis::PC, Axis::CU, Axis::CE];

/// Metrics for one `(domain, axis)` cell, or one axis pooled over domains
/// when `domain` is `None`. Undefined correlations are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub domain: Option<Domain>,
    pub axis: Axis,
    pub count: usize,
    pub mse: f64,
    pub lcc: Option<f64>,
    pub srcc: Option<f64>,
    pub ktau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub level: Level,
    /// Human-readable description of the score scale the metrics were computed on.
    pub scale: String,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    Csv,
}

fn row_metrics(
    domain: Option<Domain>,
    axis: Axis,
    pred: &[f64],
    gold: &[f64],
) -> Result<MetricRow> {
    Ok(MetricRow {
        domain,
        axis,
        count: pred.len(),
        mse: mse(pred, gold)?,
        lcc: pcc(pred, gold).ok(),
        srcc: srcc(pred, gold).ok(),
        ktau: ktau(pred, gold).ok(),
    })
}

/// Aggregate at `level`, then compute every metric per `(domain, axis)`.
pub fn evaluate_records(
    records: &[ScoredRecord],
    level: Level,
    scale: impl Into<String>,
) -> Result<MetricReport> {
    let groups = aggregate(records, level)?;
    let mut cells: BTreeMap<(Domain, Axis), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for g in &groups {
        let cell = cells.entry((g.domain, g.axis)).or_default();
        cell.0.push(g.prediction);
        cell.1.push(g.gold);
    }
    let mut rows = Vec::new();
    for domain in Domain::ALL {
        for axis in AXIS_ORDER {
            if let Some((pred, gold)) = cells.get(&(domain, axis)) {
                rows.push(row_metrics(Some(domain), axis, pred, gold)?);
            }
        }
    }
    Ok(MetricReport {
        level,
        scale: scale.into(),
        rows,
    })
}

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

fn check_complete(report: &MetricReport) -> Result<()> {
    if report.rows.is_empty() {
        return Err(AesaError::IncompleteReport("report has no rows".into()));
    }
    let mut seen: BTreeMap<Option<Domain>, Vec<Axis>> = BTreeMap::new();
    for row in &report.rows {
        let axes = seen.entry(row.domain).or_default();
        if axes.contains(&row.axis) {
            return Err(AesaError::IncompleteReport(format!(
                "duplicate cell ({}, {})",
                domain_name(row.domain),
                row.axis
            )));
        }
        axes.push(row.axis);
    }
    for (domain, axes) in &seen {
        for axis in Axis::ALL {
            if !axes.contains(&axis) {
                return Err(AesaError::IncompleteReport(format!(
                    "missing cell ({}, {axis})",
                    domain_name(*domain)
                )));
            }
        }
    }
    Ok(())
}

fn domain_name(domain: Option<Domain>) -> &'static str {
    domain.map_or("all", Domain::as_str)
}

/// Render as an aligned text table (4 decimals) or as delimited text with
/// header [`REPORT_HEADER`]. Every domain present must carry all four axes.
pub fn render_report(report: &MetricReport, format: ReportFormat) -> Result<String> {
    check_complete(report)?;
    let mut out = String::new();
    match format {
        ReportFormat::TextTable => {
            writeln!(out, "{}-level results ({})", report.level, report.scale).unwrap();
            writeln!(
                out,
                "{:<8} {:<4} {:>9} {:>9} {:>9} {:>9}",
                "Domain", "Axis", "MSE", "LCC", "SRCC", "KTAU"
            )
            .unwrap();
            let mut last = None;
            for row in &report.rows {
                let label = if last == Some(row.domain) {
                    ""
                } else {
                    row.domain.map_or("All", Domain::label)
                };
                last = Some(row.domain);
                writeln!(
                    out,
                    "{:<8} {:<4} {:>9} {:>9} {:>9} {:>9}",
                    label,
                    row.axis.as_str(),
                    format!("{:.4}", row.mse),
                    cell(row.lcc),
                    cell(row.srcc),
                    cell(row.ktau)
                )
                .unwrap();
            }
        }
        ReportFormat::Csv => {
            writeln!(out, "{REPORT_HEADER}").unwrap();
            for row in &report.rows {
                writeln!(
                    out,
                    "{},{},{:.4},{},{},{}",
                    domain_name(row.domain),
                    row.axis,
                    row.mse,
                    cell(row.lcc),
                    cell(row.srcc),
                    cell(row.ktau)
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}
