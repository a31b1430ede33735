//! Plain-text tables for the terminal.

use std::fmt::Write;

use stlfunnel_core::contracts::Verdict;
use stlfunnel_core::pipeline::{DesignRow, MonitorRow, RunSummary, VerifyReport};

/// At most this many rows per table; the JSON files always hold everything.
const MAX_ROWS: usize = 20;

fn elided(s: &mut String, total: usize) {
    if total > MAX_ROWS {
        let _ = writeln!(s, "  ... {} more (see the JSON output)", total - MAX_ROWS);
    }
}

pub fn design_table(rows: &[DesignRow]) -> String {
    let mut s = String::from("design\n");
    let _ = writeln!(
        s,
        "  {:>6} {:>10} {:>10} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}  formula",
        "id", "rho0", "rho_opt", "t*", "rho_max", "r", "gamma0", "gamma_inf", "l"
    );
    for r in rows.iter().take(MAX_ROWS) {
        let opt = r.rho_opt.map_or_else(|| "inf".to_string(), |v| format!("{v:.5}"));
        let _ = writeln!(
            s,
            "  {:>6} {:>10.5} {:>10} {:>8} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.6}  {}",
            r.subsystem.to_string(),
            r.rho0,
            opt,
            r.t_star,
            r.rho_max,
            r.r,
            r.gamma0,
            r.gamma_inf,
            r.decay,
            r.formula
        );
    }
    elided(&mut s, rows.len());
    s
}

pub fn monitor_table(rows: &[MonitorRow]) -> String {
    let mut s = String::from("monitor\n");
    let _ = writeln!(s, "  {:>6} {:>12} {:>12} {:>12}  result", "id", "rho_phi", "r", "margin");
    // Failures first so they are never elided.
    let mut sorted: Vec<&MonitorRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.pass);
    for r in sorted.iter().take(MAX_ROWS) {
        let _ = writeln!(
            s,
            "  {:>6} {:>12.6} {:>12.6} {:>12.6}  {}",
            r.subsystem.to_string(),
            r.value,
            r.r,
            r.value - r.r,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    elided(&mut s, rows.len());
    let passed = rows.iter().filter(|r| r.pass).count();
    let _ = writeln!(s, "  {passed}/{} tasks satisfied", rows.len());
    s
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

pub fn verify_text(rep: &VerifyReport) -> String {
    let mut s = String::from("contracts\n");
    let mut rows: Vec<_> = rep.reports.values().collect();
    rows.sort_by_key(|r| r.is_uniform_strong());
    for r in rows.iter().take(MAX_ROWS) {
        let verdict = match r.verdict {
            Verdict::UniformStrongSatisfied { delta } => format!("uniform-strong (delta = {delta})"),
            Verdict::WeakSatisfied => "weak only".to_string(),
            Verdict::Violated { t } => format!("VIOLATED at t = {t}"),
        };
        let _ = writeln!(s, "  {:>6}  {verdict}", r.subsystem.to_string());
    }
    elided(&mut s, rep.reports.len());
    let c = &rep.composition;
    let _ = writeln!(s, "composition");
    let _ = writeln!(s, "  (i)   initial states inside guarantees: {}", mark(c.initial_inside));
    let _ = writeln!(s, "  (ii)  every contract uniform-strong:    {}", mark(c.uniform_strong));
    let _ = writeln!(
        s,
        "  (iii) guarantees within assumptions:    {}",
        mark(c.assumptions_cover_guarantees)
    );
    for f in c.findings.iter().take(MAX_ROWS) {
        let _ = writeln!(s, "        {f}");
    }
    let _ = writeln!(s, "  network satisfies all guarantees: {}", mark(rep.global));
    s
}

pub fn summary_text(sum: &RunSummary) -> String {
    format!(
        "summary: {} violations, {} clamp events, monitors {}, contracts {}, composition {} => {}\n",
        sum.violations,
        sum.clamp_events,
        mark(sum.monitors_pass),
        mark(sum.contracts_uniform_strong),
        mark(sum.composition_holds),
        if sum.success { "SUCCESS" } else { "FAILURE" }
    )
}
