//! Output side of the boundary: trace CSVs, KPI documents and the
//! side-by-side comparison table.
//!
//! Every numeric column is written with Rust's shortest round-trip float
//! formatting, so a written trace reloads to bit-identical values and two
//! runs of the same scenario produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::model::StateVector;
use crate::sim::{ClosedLoopTrace, KpiReport, StepMode, TraceRow};

/// Failure while writing or reading result files.
#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error("serializing KPI report: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.display().to_string(), source }
}

fn malformed(path: &Path, message: String) -> ReportError {
    ReportError::Malformed { path: path.display().to_string(), message }
}

/// Column layout of a trace CSV, fixed for golden-file comparisons.
pub const TRACE_HEADER: &str =
    "step,hour,x1,x2,x3,x4,x5,x6,x7,x8,u,mode,in_F,in_R,energy_kwh,cost_eur,delta1,delta2";

/// Renders a closed-loop trace as CSV text (header always present).
pub fn trace_to_csv(trace: &ClosedLoopTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for row in &trace.rows {
        write!(out, "{},{}", row.step, row.hour).expect("string write");
        for x in row.state.0 {
            write!(out, ",{x}").expect("string write");
        }
        write!(
            out,
            ",{},{},{},{},{},{},{},{}",
            row.u as u8,
            row.mode.as_str(),
            row.in_flex_window as u8,
            row.in_request as u8,
            row.energy_kwh,
            row.cost_eur,
            row.delta1,
            row.delta2
        )
        .expect("string write");
        out.push('\n');
    }
    out
}

/// Writes a closed-loop trace to `path` as CSV.
pub fn write_trace(trace: &ClosedLoopTrace, path: &Path) -> Result<(), ReportError> {
    fs::write(path, trace_to_csv(trace)).map_err(|e| io_err(path, e))
}

fn parse_mode(text: &str, path: &Path, row: usize) -> Result<StepMode, ReportError> {
    match text {
        "normal" => Ok(StepMode::Normal),
        "committed_off" => Ok(StepMode::CommittedOff),
        "rule_based" => Ok(StepMode::RuleBased),
        other => Err(malformed(path, format!("row {row}: unknown mode \"{other}\""))),
    }
}

fn parse_bit(text: &str, column: &str, path: &Path, row: usize) -> Result<bool, ReportError> {
    match text {
        "0" => Ok(false),
        "1" => Ok(true),
        other => {
            Err(malformed(path, format!("row {row}: {column} must be 0 or 1, got \"{other}\"")))
        }
    }
}

/// Reads a trace CSV back into rows. Inverse of [`write_trace`] up to the
/// per-run metadata (controller, events) that the CSV does not carry.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == TRACE_HEADER => {}
        Some(header) => {
            return Err(malformed(path, format!("unexpected header \"{header}\"")));
        }
        None => return Err(malformed(path, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 18 {
            return Err(malformed(path, format!("row {i}: expected 18 columns, got {}", fields.len())));
        }
        let num = |j: usize, name: &str| -> Result<f64, ReportError> {
            fields[j]
                .parse::<f64>()
                .map_err(|_| malformed(path, format!("row {i}: bad {name} \"{}\"", fields[j])))
        };
        let mut state = [0.0; 8];
        for (s, j) in state.iter_mut().zip(2..10) {
            *s = num(j, "temperature")?;
        }
        rows.push(TraceRow {
            step: fields[0]
                .parse::<usize>()
                .map_err(|_| malformed(path, format!("row {i}: bad step \"{}\"", fields[0])))?,
            hour: num(1, "hour")?,
            state: StateVector(state),
            u: parse_bit(fields[10], "u", path, i)?,
            mode: parse_mode(fields[11], path, i)?,
            in_flex_window: parse_bit(fields[12], "in_F", path, i)?,
            in_request: parse_bit(fields[13], "in_R", path, i)?,
            energy_kwh: num(14, "energy_kwh")?,
            cost_eur: num(15, "cost_eur")?,
            delta1: num(16, "delta1")?,
            delta2: num(17, "delta2")?,
        });
    }
    Ok(rows)
}

/// Row labels of the KPI table, shared by single reports and comparisons.
const KPI_LABELS: [&str; 4] = [
    "Average Water Temperature",
    "Maximal Constraint violation",
    "Energy Consumption",
    "Energy Cost",
];

fn kpi_values(report: &KpiReport) -> [String; 4] {
    [
        format!("{:.2} °C", report.avg_temperature_c),
        format!("{:.2} K", report.max_violation_c),
        match report.energy_pct_of_baseline {
            Some(pct) => format!("{:.2} kWh ({:.2}%)", report.energy_kwh, pct),
            None => format!("{:.2} kWh", report.energy_kwh),
        },
        match report.cost_pct_of_baseline {
            Some(pct) => format!("{:.2} € ({:.2}%)", report.cost_eur, pct),
            None => format!("{:.2} €", report.cost_eur),
        },
    ]
}

/// Renders one KPI report as an aligned two-column table.
pub fn kpi_table(title: &str, report: &KpiReport) -> String {
    let width = KPI_LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "{title}").expect("string write");
    for (label, value) in KPI_LABELS.iter().zip(kpi_values(report)) {
        writeln!(out, "  {label:width$}  {value}").expect("string write");
    }
    writeln!(out, "  {:width$}  {}", "Switching operations", report.switch_total)
        .expect("string write");
    out
}

/// Writes a KPI report as a JSON document plus a human-readable table.
pub fn write_kpis(
    report: &KpiReport,
    title: &str,
    json_path: &Path,
    text_path: &Path,
) -> Result<(), ReportError> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(json_path, json).map_err(|e| io_err(json_path, e))?;
    fs::write(text_path, kpi_table(title, report)).map_err(|e| io_err(text_path, e))
}

/// Renders the paired study table: baseline block, controller block, and
/// the controller-vs-baseline ratio lines.
pub fn comparison_table(
    baseline_title: &str,
    baseline: &KpiReport,
    controller_title: &str,
    controller: &KpiReport,
) -> String {
    let mut out = String::new();
    out.push_str(&kpi_table(baseline_title, baseline));
    out.push('\n');
    out.push_str(&kpi_table(controller_title, controller));
    out.push('\n');
    writeln!(out, "{controller_title} relative to {baseline_title}:").expect("string write");
    if let Some(pct) = controller.energy_pct_of_baseline {
        writeln!(out, "  Energy Consumption ratio  {pct:.2}%").expect("string write");
    }
    if let Some(pct) = controller.cost_pct_of_baseline {
        writeln!(out, "  Energy Cost ratio         {pct:.2}%").expect("string write");
    }
    out
}
