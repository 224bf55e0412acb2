use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rccda_core::analysis::BoundReport;
use rccda_core::config::SuiteConfig;
use rccda_core::export::{export_trace, trace_stem, write_json, write_plot_data};
use rccda_core::harness::{CrnCheck, GroupAnalysis, SuiteResult, SummaryRow};
use rccda_core::Result;
use serde::Serialize;

#[derive(Serialize)]
struct SuiteSummary<'a> {
    config: &'a SuiteConfig,
    rows: &'a [SummaryRow],
    groups: &'a [GroupAnalysis],
    crn_consistent: bool,
    crn: &'a [CrnCheck],
    violated: Vec<&'a BoundReport>,
    bound_reports: Vec<&'a BoundReport>,
    traces: Vec<PathBuf>,
}

/// Writes traces, plot data and `summary.json` under `out`, after all
/// episodes have finished.
pub fn write_suite(out: &Path, cfg: &SuiteConfig, result: &SuiteResult, extra: &[BoundReport]) -> Result<PathBuf> {
    let mut traces = Vec::new();
    if cfg.output.traces {
        for t in &result.traces {
            let path = out.join("traces").join(format!("{}.csv", trace_stem(&t.summary)));
            export_trace(t, &path)?;
            traces.push(path);
        }
    }
    if cfg.output.plot_data {
        write_plot_data(&result.traces, &out.join("plot_data.csv"))?;
    }
    let reports: Vec<&BoundReport> = result.bound_reports.iter().chain(extra).collect();
    let summary = SuiteSummary {
        config: cfg,
        rows: &result.rows,
        groups: &result.groups,
        crn_consistent: result.crn_consistent(),
        crn: &result.crn,
        violated: reports.iter().copied().filter(|r| !r.satisfied).collect(),
        bound_reports: reports,
        traces,
    };
    let path = out.join("summary.json");
    write_json(&summary, &path)?;
    Ok(path)
}

pub fn print_rows(rows: &[SummaryRow]) {
    println!(
        "{:<20} {:<10} {:>5} {:>17} {:>15} {:>10}",
        "policy", "schedule", "seeds", "accuracy", "update rate", "violation"
    );
    for r in rows {
        let acc = match (r.accuracy_mean, r.accuracy_std) {
            (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
            _ => "-".to_string(),
        };
        println!(
            "{:<20} {:<10} {:>5} {:>17} {:>15} {:>10.4}",
            r.policy,
            r.schedule,
            r.seeds,
            acc,
            format!("{:.4} ± {:.4}", r.update_rate_mean, r.update_rate_std),
            r.violation_mean
        );
    }
}

/// Per-kind counts and worst slack, then every violated report.
pub fn print_reports(reports: &[&BoundReport]) {
    let mut kinds: BTreeMap<&str, (usize, usize, f64)> = BTreeMap::new();
    for r in reports {
        let kind = r.name.split('[').next().unwrap_or(&r.name);
        let e = kinds.entry(kind).or_insert((0, 0, f64::INFINITY));
        e.0 += 1;
        e.1 += usize::from(r.satisfied);
        e.2 = e.2.min(r.slack);
    }
    println!("{:<22} {:>8} {:>10} {:>14}", "check", "count", "satisfied", "min slack");
    for (kind, (n, ok, slack)) in kinds {
        println!("{kind:<22} {n:>8} {ok:>10} {slack:>14.6e}");
    }
    let bad: Vec<_> = reports.iter().filter(|r| !r.satisfied).collect();
    if !bad.is_empty() {
        println!("\nviolated:");
        println!("{:<48} {:>14} {:>14} {:>14}", "report", "lhs", "rhs", "slack");
        for r in bad {
            println!("{:<48} {:>14.6e} {:>14.6e} {:>14.6e}", r.name, r.lhs, r.rhs, r.slack);
        }
    }
}

pub fn print_groups(groups: &[GroupAnalysis]) {
    if groups.is_empty() {
        return;
    }
    println!(
        "{:<20} {:<10} {:>8} {:>12} {:>14} {:>14}",
        "policy", "schedule", "p_min", "sigma^2", "grad avg", "bound"
    );
    for g in groups {
        println!(
            "{:<20} {:<10} {:>8.4} {:>12.4e} {:>14.6e} {:>14.6e}",
            g.policy, g.schedule, g.p_min, g.sigma_sq, g.trace_convergence_lhs, g.trace_convergence_rhs
        );
    }
}
