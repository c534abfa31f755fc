//! Report rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ReportFormat;
use crate::events::EventTotals;
use crate::pipeline::RunSummary;
use crate::timing::{ModelBreakdown, ValidationReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonReport {
    pub schema_version: u32,
    #[serde(flatten)]
    pub totals: EventTotals,
    pub cycles: u64,
    pub predicted_cycles: u64,
    pub delta: i64,
    pub pass: bool,
    pub exit_code: Option<u32>,
    pub config_digest: String,
    pub program_digest: String,
    pub counters: Vec<u64>,
    pub console: String,
    pub digest: String,
}

impl JsonReport {
    pub fn new(s: &RunSummary, v: &ValidationReport, program_digest: &str) -> Self {
        JsonReport {
            schema_version: SCHEMA_VERSION,
            totals: s.totals,
            cycles: s.cycles,
            predicted_cycles: v.predicted,
            delta: v.delta,
            pass: v.pass,
            exit_code: s.exit_code,
            config_digest: s.config_digest.clone(),
            program_digest: program_digest.to_owned(),
            counters: s.counters.clone(),
            console: s.console.clone(),
            digest: s.digest.clone(),
        }
    }
}

/// Fixed-width rendering of a breakdown.
pub fn table(b: &ModelBreakdown) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<30} {:>14} {:>10} {:>16}", "Event", "Event count", "Cycles/ev", "Cumulative");
    for r in &b.rows {
        let count = r.count.map_or_else(|| "-".to_owned(), |c| c.to_string());
        let _ = writeln!(s, "{:<30} {:>14} {:>10} {:>16}", r.event, count, r.cycles_per_event, r.cumulative);
    }
    s
}

pub fn emit_report(
    s: &RunSummary,
    v: &ValidationReport,
    program_digest: &str,
    format: ReportFormat,
) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(&JsonReport::new(s, v, program_digest))
                .expect("report serializes");
            out.push('\n');
            out.into_bytes()
        }
        ReportFormat::Csv => v.breakdown.to_csv().into_bytes(),
        ReportFormat::Table => {
            let mut out = table(&v.breakdown);
            let _ = writeln!(out, "\nmeasured cycles  {}", v.measured);
            let _ = writeln!(out, "predicted cycles {}", v.predicted);
            let _ = writeln!(out, "delta            {}", v.delta);
            let _ = writeln!(out, "result           {}", if v.pass { "PASS" } else { "FAIL" });
            out.into_bytes()
        }
    }
}
