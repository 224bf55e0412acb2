//! Bound checks on recorded traces.

use serde::{Deserialize, Serialize};

use super::episode::{Objective, RunConfig};
use crate::analysis::{
    convergence_rhs, corollary_rhs, measure_p_min, pinsker_loss_bound, queue_bound_check,
    stability_rhs, BoundReport, TheoremConstants,
};
use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::trace::RunTrace;

/// Tolerance of the telescoping identity, which is exact up to rounding.
const TELESCOPE_TOL: f64 = 1e-9;

fn oracle_missing() -> Error {
    Error::MissingOracle("trace was recorded without oracle mode")
}

/// `(1/T) Σ ‖∇f(θ_t, D_{t+1})‖²`.
pub fn trace_convergence_lhs(trace: &RunTrace) -> Result<f64> {
    if !trace.has_oracle() {
        return Err(oracle_missing());
    }
    let sum: f64 = trace
        .records
        .iter()
        .map(|r| r.oracle.map_or(0.0, |o| o.grad_norm_true.powi(2)))
        .sum();
    Ok(sum / trace.records.len() as f64)
}

/// Convergence bound evaluated with the trace's own losses and drift.
pub fn trace_convergence_rhs(trace: &RunTrace, k: &TheoremConstants<f64>) -> Result<f64> {
    let (f0, ft) = trace
        .summary
        .initial_pool_loss
        .zip(trace.summary.final_pool_loss)
        .ok_or_else(oracle_missing)?;
    if !trace.has_oracle() {
        return Err(oracle_missing());
    }
    let drift: f64 = trace.records.iter().filter_map(|r| r.oracle).map(|o| o.drift_loss).sum();
    convergence_rhs(trace.records.len(), f0, ft, drift, k)
}

/// Checks that hold on a single trace: the queue bound, the stability bound
/// for the threshold policy, and in oracle mode the per-step Pinsker bound
/// and the loss telescoping identity.
pub fn episode_reports(cfg: &RunConfig, trace: &RunTrace) -> Result<Vec<BoundReport>> {
    let s = &trace.summary;
    let tag = format!("{}/{}/seed={}", s.policy, s.schedule, s.seed);
    let mut out = Vec::new();
    let mut q = queue_bound_check(s.final_queue, cfg.horizon, s.violation);
    q.name = format!("queue_bound[{tag}]");
    out.push(q);

    if let (Policy::Rccda(p), Some(b)) = (&cfg.policy, cfg.loss_bound()) {
        let costs = trace.costs();
        let bound = stability_rhs(
            cfg.horizon,
            &costs,
            cfg.avg_cost,
            p.v_weight,
            b,
            &cfg.delta_series[..cfg.horizon],
        )?;
        out.push(BoundReport::new(format!("stability_sup[{tag}]"), s.violation, bound.sup));
        out.push(BoundReport::new(format!("stability_mean[{tag}]"), s.violation, bound.mean));
    }

    if trace.has_oracle() {
        if let Some(b) = cfg.loss_bound() {
            // Worst excess of the drift-induced loss over its Pinsker bound.
            let worst = trace
                .records
                .iter()
                .map(|r| r.oracle.map_or(0.0, |o| o.drift_loss) - pinsker_loss_bound(b, r.delta_t))
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(BoundReport::new(format!("pinsker_steps[{tag}]"), worst, 0.0));
        }
        if let (Some(f0), Some(ft)) = (s.initial_pool_loss, s.final_pool_loss) {
            let losses: Vec<f64> = trace
                .records
                .iter()
                .filter_map(|r| r.oracle.map(|o| o.pool_loss))
                .chain(std::iter::once(ft))
                .collect();
            let sum: f64 = losses.windows(2).map(|w| w[1] - w[0]).sum();
            out.push(BoundReport::new(
                format!("telescoping[{tag}]"),
                (sum - (ft - f0)).abs(),
                TELESCOPE_TOL,
            ));
        }
    }
    Ok(out)
}

/// Analysis settings for multi-seed checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub p_min_floor: f64,
    pub sigma_safety: f64,
    /// Alternative floors reported as a sensitivity study.
    pub p_min_sensitivity: Vec<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            p_min_floor: 0.01,
            sigma_safety: 1.5,
            p_min_sensitivity: vec![0.01, 0.05, 0.1],
        }
    }
}

/// Seed-averaged checks for one (policy, schedule) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAnalysis {
    pub policy: String,
    pub schedule: String,
    pub seeds: usize,
    /// Smallest per-step update frequency before flooring.
    pub p_min_raw: f64,
    pub p_min: f64,
    pub sigma_sq: f64,
    pub trace_convergence_lhs: f64,
    pub trace_convergence_rhs: f64,
    /// Convergence bound recomputed with `p_min` set to each sensitivity floor.
    pub sensitivity: Vec<(f64, f64)>,
    pub reports: Vec<BoundReport>,
}

/// Constants for a group, with `p_min` and `σ²` measured from its traces.
pub fn group_constants(
    cfg: &RunConfig,
    traces: &[RunTrace],
    settings: &AnalysisSettings,
) -> Result<(TheoremConstants<f64>, f64)> {
    let decisions: Vec<Vec<bool>> = traces.iter().map(RunTrace::decisions).collect();
    let p_min_raw = measure_p_min(&decisions, 0.0)?;
    let sigma_sq = match cfg.objective {
        Objective::Quadratic { .. } => 0.0,
        Objective::Classifier { .. } => {
            let m = traces
                .iter()
                .map(|t| t.summary.sigma_sq.ok_or_else(oracle_missing))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            m * settings.sigma_safety
        }
    };
    let k = TheoremConstants {
        l_smooth: cfg.l_smooth,
        eta: cfg.learner.alpha,
        sigma_sq,
        b_bound: cfg.loss_bound(),
        p_min: p_min_raw.max(settings.p_min_floor),
        delta_series: cfg.delta_series[..cfg.horizon].to_vec(),
    };
    k.validate()?;
    Ok((k, p_min_raw))
}

/// The convergence bound on seed-averaged quantities and, for bounded
/// losses, the drift-only corollary.
pub fn group_analysis(
    cfg: &RunConfig,
    traces: &[RunTrace],
    settings: &AnalysisSettings,
) -> Result<GroupAnalysis> {
    let first = traces.first().ok_or(Error::EmptyBatch)?;
    let (k, p_min_raw) = group_constants(cfg, traces, settings)?;
    let n = traces.len() as f64;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for t in traces {
        lhs += trace_convergence_lhs(t)?;
        rhs += trace_convergence_rhs(t, &k)?;
    }
    let (lhs, rhs) = (lhs / n, rhs / n);
    let tag = format!("{}/{}", first.summary.policy, first.summary.schedule);
    let mut reports = vec![BoundReport::new(format!("convergence[{tag}]"), lhs, rhs)];
    if k.b_bound.is_some() {
        let c = corollary_rhs(cfg.horizon, &k)?;
        reports.push(BoundReport::new(format!("corollary[{tag}]"), lhs, c.conservative()));
        reports.push(BoundReport::new(
            format!("corollary_dominates[{tag}]"),
            rhs,
            c.conservative(),
        ));
    }
    let mut sensitivity = Vec::new();
    for &floor in &settings.p_min_sensitivity {
        let kf = TheoremConstants {
            p_min: p_min_raw.max(floor),
            ..k.clone()
        };
        let mut r = 0.0;
        for t in traces {
            r += trace_convergence_rhs(t, &kf)?;
        }
        sensitivity.push((floor, r / n));
    }
    Ok(GroupAnalysis {
        policy: first.summary.policy.clone(),
        schedule: first.summary.schedule.clone(),
        seeds: traces.len(),
        p_min_raw,
        p_min: k.p_min,
        sigma_sq: k.sigma_sq,
        trace_convergence_lhs: lhs,
        trace_convergence_rhs: rhs,
        sensitivity,
        reports,
    })
}
