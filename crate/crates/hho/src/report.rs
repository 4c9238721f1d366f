//! CSV, JSON and plot-data writers for convergence studies, temporal
//! studies and stability logs.

use std::fmt::Write as _;

use hho_core::{
    analysis::{ConvergenceReport, ConvergenceRow, TemporalReport},
    timeloop::StabilityRecord,
};
use serde::Serialize;

pub const CONVERGENCE_HEADER: &str = "h,tau,ndofs,l2_error,l2_order,energy_error,energy_order";
pub const STABILITY_HEADER: &str = "step,t,l2_cell_norm,energy_half_norm";
pub const TEMPORAL_HEADER: &str = "tau,steps,l2_error,energy_error";

fn order(o: Option<f64>) -> String {
    o.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// One line per refinement; orders are empty on the first row.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = format!("{CONVERGENCE_HEADER}\n");
    for r in &report.rows {
        writeln!(
            out,
            "{:e},{:e},{},{:e},{},{:e},{}",
            r.h,
            r.tau,
            r.ndofs,
            r.l2_error,
            order(r.l2_order),
            r.energy_error,
            order(r.energy_order)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Serialize)]
struct JsonMetadata<'a> {
    generator: String,
    mesh: &'a str,
    k: usize,
    final_time: f64,
    tau_rule: String,
    levels: usize,
    l2_slope: Option<f64>,
    energy_slope: Option<f64>,
}

#[derive(Debug, Serialize)]
struct JsonRow {
    h: f64,
    tau: f64,
    steps: usize,
    ndofs: usize,
    l2_error: f64,
    l2_order: Option<f64>,
    energy_error: f64,
    energy_order: Option<f64>,
    reconstruction_gradient_error: f64,
    reconstruction_gradient_order: Option<f64>,
    reconstruction_l2_error: f64,
    reconstruction_l2_order: Option<f64>,
    stability_constant: Option<f64>,
}

impl From<&ConvergenceRow> for JsonRow {
    fn from(r: &ConvergenceRow) -> Self {
        Self {
            h: r.h,
            tau: r.tau,
            steps: r.steps,
            ndofs: r.ndofs,
            l2_error: r.l2_error,
            l2_order: r.l2_order,
            energy_error: r.energy_error,
            energy_order: r.energy_order,
            reconstruction_gradient_error: r.reconstruction_gradient_error,
            reconstruction_gradient_order: r.reconstruction_gradient_order,
            reconstruction_l2_error: r.reconstruction_l2_error,
            reconstruction_l2_order: r.reconstruction_l2_order,
            stability_constant: r.stability_constant,
        }
    }
}

#[derive(Debug, Serialize)]
struct JsonReport<'a> {
    metadata: JsonMetadata<'a>,
    rows: Vec<JsonRow>,
}

/// The full report, including reconstruction errors and stability
/// constants, under a metadata block.
pub fn convergence_json(report: &ConvergenceReport) -> String {
    let doc = JsonReport {
        metadata: JsonMetadata {
            generator: format!("hho {}", env!("CARGO_PKG_VERSION")),
            mesh: &report.mesh,
            k: report.k,
            final_time: report.final_time,
            tau_rule: report.tau_rule.to_string(),
            levels: report.rows.len(),
            l2_slope: report.l2_slope().ok(),
            energy_slope: report.energy_slope().ok(),
        },
        rows: report.rows.iter().map(JsonRow::from).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn log10_or_empty(v: f64) -> String {
    if v > 0.0 {
        format!("{:.8}", v.log10())
    } else {
        String::new()
    }
}

/// `log10` pairs for a log-log plot of both errors against `h`.
pub fn convergence_plot_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("log10_h,log10_l2_error,log10_energy_error\n");
    for r in &report.rows {
        writeln!(out, "{},{},{}", log10_or_empty(r.h), log10_or_empty(r.l2_error), log10_or_empty(r.energy_error)).unwrap();
    }
    out
}

/// Aligned text table in the layout of the usual convergence tables.
pub fn convergence_table(report: &ConvergenceReport) -> String {
    let mut out = format!(
        "mesh {}, k = {}, T = {}, tau rule {}\n",
        report.mesh, report.k, report.final_time, report.tau_rule
    );
    writeln!(
        out,
        "{:>11} {:>11} {:>6} {:>9} {:>12} {:>6} {:>12} {:>6} {:>9}",
        "h", "tau", "steps", "ndofs", "L2 error", "order", "energy error", "order", "stab C"
    )
    .unwrap();
    let o = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
    for r in &report.rows {
        writeln!(
            out,
            "{:>11.4e} {:>11.4e} {:>6} {:>9} {:>12.4e} {:>6} {:>12.4e} {:>6} {:>9}",
            r.h,
            r.tau,
            r.steps,
            r.ndofs,
            r.l2_error,
            o(r.l2_order),
            r.energy_error,
            o(r.energy_order),
            r.stability_constant.map(|c| format!("{c:.3e}")).unwrap_or_else(|| "-".into())
        )
        .unwrap();
    }
    out
}

pub fn stability_csv(records: &[StabilityRecord]) -> String {
    let mut out = format!("{STABILITY_HEADER}\n");
    for r in records {
        writeln!(out, "{},{:e},{:e},{:e}", r.step, r.time, r.l2_cell_norm, r.energy_half_norm).unwrap();
    }
    out
}

pub fn temporal_csv(report: &TemporalReport) -> String {
    let mut out = format!("{TEMPORAL_HEADER}\n");
    for r in &report.rows {
        writeln!(out, "{:e},{},{:e},{:e}", r.tau, r.steps, r.l2_error, r.energy_error).unwrap();
    }
    out
}

/// `log10` pairs `(τ, L² error)`; rows with a zero error leave the value
/// empty.
pub fn temporal_plot_csv(report: &TemporalReport) -> String {
    let mut out = String::from("log10_tau,log10_l2_error\n");
    for r in &report.rows {
        writeln!(out, "{},{}", log10_or_empty(r.tau), log10_or_empty(r.l2_error)).unwrap();
    }
    out
}

/// Text summary of a temporal study; the slope line reads `undefined`
/// when it cannot be fitted.
pub fn temporal_table(report: &TemporalReport) -> String {
    let mut out = format!("h = {:.4e}, k = {}, T = {}\n", report.h, report.k, report.final_time);
    writeln!(out, "{:>11} {:>6} {:>12} {:>12}", "tau", "steps", "L2 error", "energy error").unwrap();
    for r in &report.rows {
        writeln!(out, "{:>11.4e} {:>6} {:>12.4e} {:>12.4e}", r.tau, r.steps, r.l2_error, r.energy_error).unwrap();
    }
    match report.l2_slope() {
        Some(s) => writeln!(out, "L2 slope in tau: {s:.3}").unwrap(),
        None => writeln!(out, "L2 slope in tau: undefined").unwrap(),
    }
    out
}
