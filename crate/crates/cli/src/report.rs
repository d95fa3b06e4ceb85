//! Side-by-side comparison of every solved and verified variant in a run
//! directory.

use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use rcuc_core::uc_milp::{CostBreakdown, ModelVariant};

use crate::commands::{model_dir, VerificationReport};
use crate::config::RunConfig;

pub const REPORT_HEADER: &str =
    "model,total,startup,operation,reserves,rocof_lowest_netload,gap_pct,max_rocof,violations";
pub const GAPS_HEADER: &str = "# index model gap_pct";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: ModelVariant,
    pub costs: CostBreakdown,
    pub verification: Option<VerificationReport>,
}

fn read_costs(text: &str) -> Option<CostBreakdown> {
    let line = text.lines().nth(1)?;
    let v: Vec<f64> = line.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
    let [total, startup, operation, reserves] = v.as_slice() else { return None };
    Some(CostBreakdown { total: *total, startup: *startup, operation: *operation, reserves: *reserves })
}

/// Collects rows in T, ERC, LRC, DNN order. Corrupt files are errors; absent
/// runs are skipped and returned by name.
pub fn collect(cfg: &RunConfig) -> Result<(Vec<ReportRow>, Vec<String>)> {
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for model in [ModelVariant::T, ModelVariant::Erc, ModelVariant::Lrc, ModelVariant::Dnn] {
        let dir = model_dir(cfg, model);
        let costs_path = dir.join("costs.csv");
        let Ok(text) = fs::read_to_string(&costs_path) else {
            missing.push(model.to_string());
            continue;
        };
        let costs = read_costs(&text).with_context(|| format!("malformed {}", costs_path.display()))?;
        let ver_path = dir.join("verification.json");
        let verification = match fs::read_to_string(&ver_path) {
            Ok(t) => Some(serde_json::from_str(&t).with_context(|| ver_path.display().to_string())?),
            Err(_) => None,
        };
        rows.push(ReportRow { model, costs, verification });
    }
    Ok((rows, missing))
}

fn bar(gap: f64) -> String {
    // One mark per 2 %, capped so the rendering stays narrow.
    let n = ((gap.abs() / 2.0).round() as usize).min(30);
    let marks = "#".repeat(n);
    if gap < 0.0 {
        format!("{marks:>30}|{:30}", "")
    } else {
        format!("{:>30}|{marks:<30}", "")
    }
}

pub struct Report {
    pub rows: Vec<ReportRow>,
    pub missing: Vec<String>,
    pub csv: String,
    pub text: String,
    pub gaps: String,
}

pub fn build_report(cfg: &RunConfig) -> Result<Report> {
    let (rows, missing) = collect(cfg)?;
    if rows.is_empty() {
        bail!("no runs found in {}", cfg.out_dir.display());
    }
    let mut csv = format!("{REPORT_HEADER}\n");
    let mut gaps = format!("{GAPS_HEADER}\n");
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<6} {:>12} {:>10} {:>12} {:>10} {:>9} {:>9}",
        "model", "total", "start-up", "operation", "reserves", "rocof", "gap_pct"
    );
    let mut bars = String::new();
    for (i, r) in rows.iter().enumerate() {
        let c = &r.costs;
        let low = r.verification.as_ref().map(|v| v.lowest_netload().clone());
        let rocof = low.as_ref().and_then(|p| p.highest_rocof);
        let gap = low.as_ref().and_then(|p| p.gap_pct);
        let max = r.verification.as_ref().and_then(|v| v.max_rocof());
        let viol = r
            .verification
            .as_ref()
            .map(|v| v.periods.iter().filter(|p| p.violation || p.divergent).count());
        let opt = |x: Option<f64>, d: usize| x.map_or(String::new(), |v| format!("{v:.d$}"));
        let _ = writeln!(
            csv,
            "{},{:.2},{:.2},{:.2},{:.2},{},{},{},{}",
            r.model,
            c.total,
            c.startup,
            c.operation,
            c.reserves,
            opt(rocof, 6),
            opt(gap, 4),
            opt(max, 6),
            viol.map_or(String::new(), |v| v.to_string())
        );
        let dash = |s: String| if s.is_empty() { "-".to_string() } else { s };
        let _ = writeln!(
            text,
            "{:<6} {:>12.0} {:>10.0} {:>12.0} {:>10.0} {:>9} {:>9}",
            r.model.as_str(),
            c.total,
            c.startup,
            c.operation,
            c.reserves,
            dash(opt(rocof, 4)),
            dash(opt(gap, 2))
        );
        if let Some(g) = gap {
            let _ = writeln!(gaps, "{i} {} {g:.4}", r.model);
            let _ = writeln!(bars, "{:<4} {} {g:+.2}%", r.model.as_str(), bar(g));
        }
    }
    if !bars.is_empty() {
        let _ = writeln!(text, "\nRoCoF violation gap at the lowest-netload period (one mark = 2%)");
        text.push_str(&bars);
    }
    if !missing.is_empty() {
        let _ = writeln!(text, "\nmissing runs: {}", missing.join(", "));
    }
    Ok(Report { rows, missing, csv, text, gaps })
}

pub fn cmd_report(cfg: &RunConfig) -> Result<Report> {
    let report = build_report(cfg)?;
    fs::write(cfg.out_dir.join("report.csv"), &report.csv)?;
    fs::write(cfg.out_dir.join("report.txt"), &report.text)?;
    fs::write(cfg.out_dir.join("gaps.dat"), &report.gaps)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn costs_parse() {
        let c = read_costs("Total,Start-up,Operation,Reserves\n10.00,1.00,8.00,1.00\n").unwrap();
        assert_eq!(c.total, 10.0);
        assert!(read_costs("Total\n1,2\n").is_none());
    }

    #[test]
    fn bars_point_both_ways() {
        assert!(bar(-21.6).starts_with(' ') && bar(-21.6).contains("###########|"));
        assert!(bar(22.5).contains("|###########"));
        assert_eq!(bar(0.0).trim(), "|");
    }
}
