use serde::{Deserialize, Serialize};

use super::episode::{policy_rng, run_episode, RunConfig};
use crate::error::{Error, Result};
use crate::policies::{queue_step, Histories, PolicyState, VirtualQueue};
use crate::trace::StepRecord;

/// Steps whose fields differ between a recorded and a replayed trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps: usize,
    pub mismatches: Vec<(usize, Vec<String>)>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-runs the episode from its configuration and seed and compares every
/// field of every step bit for bit.
pub fn resimulate(cfg: &RunConfig, seed: u64, recorded: &[StepRecord]) -> Result<ReplayReport> {
    let fresh = run_episode(cfg, seed)?;
    if fresh.records.len() != recorded.len() {
        return Err(Error::DimensionMismatch {
            expected: fresh.records.len(),
            got: recorded.len(),
        });
    }
    let mismatches = fresh
        .records
        .iter()
        .zip(recorded)
        .filter_map(|(a, b)| {
            let d = a.diff(b);
            (!d.is_empty()).then_some((a.t, d))
        })
        .collect();
    Ok(ReplayReport {
        steps: recorded.len(),
        mismatches,
    })
}

/// Replays only the decision, estimate and queue bookkeeping from the
/// recorded losses and update-gradient norms, without touching data or
/// model.
pub fn replay_decisions(cfg: &RunConfig, seed: u64, recorded: &[StepRecord]) -> Result<ReplayReport> {
    let mut rng = policy_rng(seed);
    let mut state = PolicyState::new(cfg.policy.clone(), cfg.avg_cost);
    let mut h = Histories::new();
    let mut q = VirtualQueue::<f64>::empty();
    let mut mismatches = Vec::new();
    for (t, r) in recorded.iter().enumerate() {
        let mut bad = Vec::new();
        if r.t != t {
            bad.push("t".to_string());
        }
        if r.q_t.to_bits() != q.q.to_bits() {
            bad.push("q_t".into());
        }
        h.push_loss(r.f_t);
        let d = state.decide(t, &h, q, r.lambda_t, &mut rng)?;
        if d.update != r.pi_t {
            bad.push("pi_t".into());
        }
        if d.ghat.to_bits() != r.ghat.to_bits() {
            bad.push("ghat".into());
        }
        // Follow the recorded decision so one mismatch does not cascade.
        if r.pi_t {
            h.record_gradient(t, r.update_grad_norm);
        }
        state.commit(r.pi_t, r.lambda_t);
        h.push_decision(r.pi_t);
        q = queue_step(q, r.lambda_t, r.pi_t, cfg.avg_cost)?;
        if !bad.is_empty() {
            mismatches.push((t, bad));
        }
    }
    Ok(ReplayReport {
        steps: recorded.len(),
        mismatches,
    })
}
