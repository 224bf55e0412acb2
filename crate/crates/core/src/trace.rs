//! Per-step records and episode traces.

use serde::{Deserialize, Serialize};

use crate::analysis::BoundReport;

/// Quantities only recorded in oracle mode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OracleRecord {
    /// `‖∇f(θ_t, D_{t+1})‖` over the full pool.
    pub grad_norm_true: f64,
    /// `f(θ_t, D_{t+1}) − f(θ_t, D_t)`.
    pub drift_loss: f64,
    /// `f(θ_t, D_t)` over the full pool.
    pub pool_loss: f64,
}

/// State of one iteration of the update loop. `q_t` and `composition` are
/// taken before the step's queue update and data drift; `accuracy` and `f_t`
/// belong to the parameters the decision was made with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub f_t: f64,
    pub pi_t: bool,
    pub q_t: f64,
    /// NaN when the objective has no notion of accuracy.
    pub accuracy: f64,
    pub drift_rate: f64,
    pub delta_t: f64,
    pub ghat: f64,
    pub lambda_t: f64,
    /// Norm of the first stochastic gradient of the update; 0 without one.
    pub update_grad_norm: f64,
    pub composition: Vec<f64>,
    pub oracle: Option<OracleRecord>,
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits()
}

impl OracleRecord {
    fn fields(&self) -> [(&'static str, f64); 3] {
        [
            ("grad_norm_true", self.grad_norm_true),
            ("drift_loss", self.drift_loss),
            ("pool_loss", self.pool_loss),
        ]
    }
}

impl StepRecord {
    fn scalar_fields(&self) -> [(&'static str, f64); 8] {
        [
            ("f_t", self.f_t),
            ("q_t", self.q_t),
            ("accuracy", self.accuracy),
            ("drift_rate", self.drift_rate),
            ("delta_t", self.delta_t),
            ("ghat", self.ghat),
            ("lambda_t", self.lambda_t),
            ("update_grad_norm", self.update_grad_norm),
        ]
    }

    /// Names of the fields whose bit patterns differ from `other`.
    pub fn diff(&self, other: &StepRecord) -> Vec<String> {
        let mut out = Vec::new();
        if self.t != other.t {
            out.push("t".into());
        }
        if self.pi_t != other.pi_t {
            out.push("pi_t".into());
        }
        for ((name, a), (_, b)) in self.scalar_fields().into_iter().zip(other.scalar_fields()) {
            if !same(a, b) {
                out.push(name.into());
            }
        }
        if self.composition.len() != other.composition.len()
            || self.composition.iter().zip(&other.composition).any(|(&a, &b)| !same(a, b))
        {
            out.push("composition".into());
        }
        match (&self.oracle, &other.oracle) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                for ((name, x), (_, y)) in a.fields().into_iter().zip(b.fields()) {
                    if !same(x, y) {
                        out.push(name.into());
                    }
                }
            }
            _ => out.push("oracle".into()),
        }
        out
    }
}

/// Equality is bitwise, so records holding NaN compare equal to their copies.
impl PartialEq for StepRecord {
    fn eq(&self, other: &Self) -> bool {
        self.diff(other).is_empty()
    }
}

/// End-of-episode metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub schedule: String,
    pub seed: u64,
    pub horizon: usize,
    /// Time-averaged holdout accuracy; absent without a classifier.
    pub mean_accuracy: Option<f64>,
    pub update_rate: f64,
    pub update_count: usize,
    /// `(1/T) Σ λ(t) π(t) − λ̄`.
    pub violation: f64,
    /// `Q(T)`.
    pub final_queue: f64,
    pub avg_cost: f64,
    /// `f(θ_0, D_0)` and `f(θ_T, D_T)` over the full pool (oracle mode).
    pub initial_pool_loss: Option<f64>,
    pub final_pool_loss: Option<f64>,
    /// Largest measured gradient-noise variance (oracle mode).
    pub sigma_sq: Option<f64>,
    /// Digest of the data stream the episode consumed.
    pub stream_digest: String,
    pub bound_reports: Vec<BoundReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config_digest: String,
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    pub fn decisions(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.pi_t).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda_t).collect()
    }

    pub fn has_oracle(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.oracle.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> StepRecord {
        StepRecord {
            t: 3,
            f_t: 0.5,
            pi_t: true,
            q_t: 0.0,
            accuracy: f64::NAN,
            drift_rate: 0.1,
            delta_t: 0.0,
            ghat: 1.0,
            lambda_t: 1.0,
            update_grad_norm: 0.7,
            composition: vec![1.0, 0.0],
            oracle: None,
        }
    }

    #[test]
    fn nan_records_equal_themselves() {
        assert_eq!(rec(), rec());
    }

    #[test]
    fn diff_names_fields() {
        let mut b = rec();
        b.ghat = 1.0 + f64::EPSILON;
        b.composition[1] = -0.0;
        assert_eq!(rec().diff(&b), vec!["ghat", "composition"]);
    }
}
