//! Machine-readable benchmark reports: a fixed-column CSV and a JSON file
//! that is byte-identical across runs of the same configuration except for
//! the timing fields.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::config::RunConfig;

/// One benchmark cell: a (orders, N, M) combination under one preconditioner.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub problem: String,
    pub scheme: String,
    pub preconditioner: String,
    pub orders: Vec<f64>,
    pub n_steps: usize,
    pub m_plus_1: usize,
    /// Average GMRES iterations per time step, rounded to one decimal as the
    /// benchmark tables report it.
    pub iter_mean: f64,
    /// Wall-clock timing field; excluded from reproducibility guarantees.
    pub cpu_seconds: f64,
    pub e_mn: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct JsonReport<'a> {
    pub config: &'a RunConfig,
    pub rows: &'a [Row],
    pub all_converged: bool,
}

pub fn write_csv(path: &Path, rows: &[Row]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "problem",
        "scheme",
        "preconditioner",
        "orders",
        "N",
        "M_plus_1",
        "iter_mean",
        "cpu_seconds",
        "E_MN",
        "converged",
    ])?;
    for r in rows {
        let orders = r
            .orders
            .iter()
            .map(|a| format!("{a}"))
            .collect::<Vec<_>>()
            .join(",");
        w.write_record([
            r.problem.clone(),
            r.scheme.clone(),
            r.preconditioner.clone(),
            orders,
            r.n_steps.to_string(),
            r.m_plus_1.to_string(),
            format!("{:.1}", r.iter_mean),
            format!("{:.6}", r.cpu_seconds),
            r.e_mn.map(|e| format!("{e:.6e}")).unwrap_or_default(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_json(path: &Path, config: &RunConfig, rows: &[Row]) -> std::io::Result<()> {
    let report = JsonReport {
        config,
        rows,
        all_converged: rows.iter().all(|r| r.converged),
    };
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    file.write_all(b"\n")
}

/// Aligned table for the terminal, one row per cell.
pub fn print_table(rows: &[Row]) {
    println!(
        "{:<10} {:<20} {:<13} {:>6} {:>8} {:>9} {:>12} {:>12} {:>9}",
        "problem", "orders", "precond", "N", "M+1", "iter", "cpu(s)", "E_MN", "converged"
    );
    for r in rows {
        let orders = r
            .orders
            .iter()
            .map(|a| format!("{a}"))
            .collect::<Vec<_>>()
            .join(",");
        println!(
            "{:<10} {:<20} {:<13} {:>6} {:>8} {:>9.1} {:>12.3} {:>12} {:>9}",
            r.problem,
            format!("({orders})"),
            r.preconditioner,
            r.n_steps,
            r.m_plus_1,
            r.iter_mean,
            r.cpu_seconds,
            r.e_mn.map(|e| format!("{e:.3e}")).unwrap_or_else(|| "-".into()),
            r.converged
        );
    }
}
