use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{group_analysis, AnalysisSettings, GroupAnalysis};
use super::episode::{run_episode, RunConfig};
use crate::analysis::BoundReport;
use crate::error::{Error, Result};
use crate::trace::RunTrace;

/// Mean ± std of the per-episode metrics of one (policy, schedule) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub schedule: String,
    pub seeds: usize,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub update_rate_mean: f64,
    pub update_rate_std: f64,
    pub violation_mean: f64,
    pub violation_max: f64,
    pub final_queue_mean: f64,
}

/// Whether every policy saw the same data stream for a (schedule, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnCheck {
    pub schedule: String,
    pub seed: u64,
    pub policies: usize,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub rows: Vec<SummaryRow>,
    pub groups: Vec<GroupAnalysis>,
    pub crn: Vec<CrnCheck>,
    /// Every episode- and group-level report.
    pub bound_reports: Vec<BoundReport>,
    #[serde(skip)]
    pub traces: Vec<RunTrace>,
}

impl SuiteResult {
    pub fn violated(&self) -> Vec<&BoundReport> {
        self.bound_reports.iter().filter(|r| !r.satisfied).collect()
    }

    pub fn crn_consistent(&self) -> bool {
        self.crn.iter().all(|c| c.consistent)
    }
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summary_row(traces: &[&RunTrace]) -> SummaryRow {
    let first = &traces[0].summary;
    let acc: Option<Vec<f64>> = traces.iter().map(|t| t.summary.mean_accuracy).collect();
    let (accuracy_mean, accuracy_std) = match acc {
        Some(a) => {
            let (m, s) = mean_std(&a);
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    let rates: Vec<f64> = traces.iter().map(|t| t.summary.update_rate).collect();
    let (update_rate_mean, update_rate_std) = mean_std(&rates);
    let viol: Vec<f64> = traces.iter().map(|t| t.summary.violation).collect();
    let queues: Vec<f64> = traces.iter().map(|t| t.summary.final_queue).collect();
    SummaryRow {
        policy: first.policy.clone(),
        schedule: first.schedule.clone(),
        seeds: traces.len(),
        accuracy_mean,
        accuracy_std,
        update_rate_mean,
        update_rate_std,
        violation_mean: mean_std(&viol).0,
        violation_max: viol.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        final_queue_mean: mean_std(&queues).0,
    }
}

/// Runs every configuration on each of its seeds, in parallel on the
/// current rayon pool, and aggregates the results. Output order does not
/// depend on scheduling: rows follow the order of `runs`, traces are sorted
/// by run and seed.
pub fn run_suite(runs: &[RunConfig], settings: &AnalysisSettings) -> Result<SuiteResult> {
    if runs.is_empty() {
        return Err(Error::invalid("suite needs at least one run"));
    }
    for r in runs {
        r.validate()?;
    }
    let jobs: Vec<(usize, u64)> = runs
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut results: Vec<(usize, u64, RunTrace)> = jobs
        .par_iter()
        .map(|&(i, s)| run_episode(&runs[i], s).map(|t| (i, s, t)))
        .collect::<Result<_>>()?;
    results.sort_by_key(|(i, s, _)| (*i, *s));

    let mut rows = Vec::new();
    let mut groups = Vec::new();
    let mut bound_reports = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let traces: Vec<&RunTrace> = results.iter().filter(|r| r.0 == i).map(|r| &r.2).collect();
        rows.push(summary_row(&traces));
        for t in &traces {
            bound_reports.extend(t.summary.bound_reports.iter().cloned());
        }
        if run.oracle_mode {
            let owned: Vec<RunTrace> = traces.iter().map(|t| (*t).clone()).collect();
            let g = group_analysis(run, &owned, settings)?;
            bound_reports.extend(g.reports.iter().cloned());
            groups.push(g);
        }
    }

    let mut digests: BTreeMap<(String, u64), Vec<&str>> = BTreeMap::new();
    for (i, s, t) in &results {
        let key = format!("{:?}", runs[*i].schedule.kind());
        digests.entry((key, *s)).or_default().push(&t.summary.stream_digest);
    }
    let crn = digests
        .into_iter()
        .map(|((key, seed), d)| CrnCheck {
            schedule: key,
            seed,
            policies: d.len(),
            consistent: d.windows(2).all(|w| w[0] == w[1]),
        })
        .collect();

    Ok(SuiteResult {
        rows,
        groups,
        crn,
        bound_reports,
        traces: results.into_iter().map(|r| r.2).collect(),
    })
}
