//! Aggregated coverage results and their CSV / JSON serializations.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Duration;

use serde::Serialize;

use super::config::{ResolvedTruth, ScenarioConfig};
use super::harness::{count_skips, Outcome, SkipReason};
use crate::error::Result;

/// Columns of the CSV report, in order.
pub const CSV_HEADER: [&str; 9] =
    ["scenario_id", "procedure", "coverage", "median_len", "q90_len", "simultaneous", "nonexistent", "reps", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcedureRow {
    pub procedure: String,
    /// Covered / recorded; NaN when nothing was recorded.
    pub coverage: f64,
    pub median_len: f64,
    pub q90_len: f64,
    pub simultaneous: f64,
    pub covered: usize,
    pub simultaneous_covered: usize,
    pub recorded: usize,
    /// Replications excluded from the denominators.
    pub skipped: usize,
    pub skip_reasons: BTreeMap<SkipReason, usize>,
    pub reps: usize,
}

/// `sorted[⌈q·m⌉ − 1]`, the lower nearest-rank quantile.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

impl ProcedureRow {
    pub(crate) fn aggregate(procedure: String, outcomes: impl Iterator<Item = Outcome> + Clone) -> Self {
        let mut lengths = Vec::new();
        let (mut covered, mut simultaneous_covered, mut reps) = (0, 0, 0);
        for o in outcomes.clone() {
            reps += 1;
            if let Outcome::Recorded { covered: c, simultaneous: s, length } = o {
                covered += c as usize;
                simultaneous_covered += s as usize;
                lengths.push(length);
            }
        }
        let skip_reasons = count_skips(outcomes);
        let recorded = lengths.len();
        lengths.sort_by(f64::total_cmp);
        let frac = |c: usize| if recorded == 0 { f64::NAN } else { c as f64 / recorded as f64 };
        Self {
            procedure,
            coverage: frac(covered),
            median_len: nearest_rank(&lengths, 0.5),
            q90_len: nearest_rank(&lengths, 0.9),
            simultaneous: frac(simultaneous_covered),
            covered,
            simultaneous_covered,
            recorded,
            skipped: reps - recorded,
            skip_reasons,
            reps,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub scenario_id: String,
    pub seed: u64,
    pub reps: usize,
    pub rows: Vec<ProcedureRow>,
    pub truth: ResolvedTruth,
    pub config: ScenarioConfig,
    /// Not serialized, so that reports stay reproducible byte for byte.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SimulationReport {
    pub fn row(&self, procedure: &str) -> Option<&ProcedureRow> {
        self.rows.iter().find(|r| r.procedure == procedure)
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.6}")
    }
}

/// One CSV row per (scenario, procedure).
pub fn write_csv<W: Write>(reports: &[SimulationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for rep in reports {
        for r in &rep.rows {
            w.write_record([
                rep.scenario_id.clone(),
                r.procedure.clone(),
                fmt_num(r.coverage),
                fmt_num(r.median_len),
                fmt_num(r.q90_len),
                fmt_num(r.simultaneous),
                r.skipped.to_string(),
                r.reps.to_string(),
                rep.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(reports: &[SimulationReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Full configs and per-procedure detail, pretty-printed.
pub fn sidecar_json(reports: &[SimulationReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}
