//! Result files.
//!
//! The per-node CSV carries one row per `(scenario, replication, node)` with
//! the fixed header
//!
//! ```text
//! scenario_id,rep,node_id,node_kind,orders_received,orders_satisfied,fill_rate_orders,qty_ordered,qty_lost,fill_rate_quantity,avg_on_hand
//! ```
//!
//! The text format is the same table, aligned for reading, optionally
//! preceded by a commented header block.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::experiments::{MspeAnalysis, ScenarioResult, SweepRow};

pub const CSV_HEADER: [&str; 11] = [
    "scenario_id",
    "rep",
    "node_id",
    "node_kind",
    "orders_received",
    "orders_satisfied",
    "fill_rate_orders",
    "qty_ordered",
    "qty_lost",
    "fill_rate_quantity",
    "avg_on_hand",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Txt,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Txt => "txt",
            ExportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario_id: String,
    pub rep: u32,
    pub node_id: u32,
    pub node_kind: String,
    pub orders_received: u64,
    pub orders_satisfied: u64,
    pub fill_rate_orders: f64,
    pub qty_ordered: u64,
    pub qty_lost: u64,
    pub fill_rate_quantity: f64,
    pub avg_on_hand: f64,
}

pub fn records(results: &[ScenarioResult]) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    for res in results {
        for rep in &res.replications {
            for n in &rep.nodes {
                out.push(ResultRecord {
                    scenario_id: res.scenario_id.clone(),
                    rep: rep.rep,
                    node_id: n.node_id.0,
                    node_kind: n.node_kind.as_str().to_string(),
                    orders_received: n.orders_received,
                    orders_satisfied: n.orders_satisfied,
                    fill_rate_orders: n.fill_rate_orders,
                    qty_ordered: n.qty_ordered,
                    qty_lost: n.qty_lost,
                    fill_rate_quantity: n.fill_rate_quantity,
                    avg_on_hand: n.avg_on_hand,
                });
            }
        }
    }
    out
}

fn nonempty(results: &[ScenarioResult]) -> io::Result<()> {
    if results.iter().all(|r| r.replications.is_empty()) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no results to export"));
    }
    Ok(())
}

pub fn write_csv<W: Write>(results: &[ScenarioResult], w: W) -> io::Result<()> {
    nonempty(results)?;
    let mut wr = csv::Writer::from_writer(w);
    for r in records(results) {
        wr.serialize(r)?;
    }
    wr.flush()
}

pub fn write_json<W: Write>(results: &[ScenarioResult], mut w: W) -> io::Result<()> {
    nonempty(results)?;
    serde_json::to_writer_pretty(&mut w, &records(results))?;
    w.write_all(b"\n")
}

/// Aligned table. Lines of `preamble` are written first, each prefixed `# `.
pub fn write_txt<W: Write>(results: &[ScenarioResult], preamble: Option<&str>, mut w: W) -> io::Result<()> {
    nonempty(results)?;
    if let Some(text) = preamble {
        for line in text.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w)?;
    }
    writeln!(
        w,
        "{:<14} {:>4} {:>5} {:<20} {:>9} {:>9} {:>8} {:>10} {:>9} {:>8} {:>11}",
        "scenario", "rep", "node", "kind", "orders", "satisfied", "fr_ord", "qty_ord", "qty_lost", "fr_qty", "avg_on_hand"
    )?;
    for r in records(results) {
        writeln!(
            w,
            "{:<14} {:>4} {:>5} {:<20} {:>9} {:>9} {:>8.4} {:>10} {:>9} {:>8.4} {:>11.2}",
            r.scenario_id,
            r.rep,
            r.node_id,
            r.node_kind,
            r.orders_received,
            r.orders_satisfied,
            r.fill_rate_orders,
            r.qty_ordered,
            r.qty_lost,
            r.fill_rate_quantity,
            r.avg_on_hand
        )?;
    }
    Ok(())
}

pub fn write_results<W: Write>(results: &[ScenarioResult], format: ExportFormat, w: W) -> io::Result<()> {
    match format {
        ExportFormat::Csv => write_csv(results, w),
        ExportFormat::Txt => write_txt(results, None, w),
        ExportFormat::Json => write_json(results, w),
    }
}

pub fn write_sweep_summary<W: Write>(rows: &[SweepRow], w: W) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()
}

pub fn write_mspe_csv<W: Write>(analysis: &MspeAnalysis, w: W) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["length_days", "reps", "mean_store_fill_rate", "mspe", "selected"])?;
    for p in &analysis.points {
        wr.write_record([
            p.length_days.to_string(),
            p.values.len().to_string(),
            p.mean.to_string(),
            p.mspe.to_string(),
            (p.length_days == analysis.selected_length).to_string(),
        ])?;
    }
    wr.flush()
}
