use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Virtual queue tracking accumulated excess resource use.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VirtualQueue<S> {
    pub q: S,
}

impl<S: Scalar> VirtualQueue<S> {
    pub fn new(q: S) -> Result<Self> {
        if !(q >= S::zero()) || !q.is_finite() {
            return Err(Error::invalid(format!("queue length must be finite and >= 0, got {q}")));
        }
        Ok(Self { q })
    }

    pub fn empty() -> Self {
        Self { q: S::zero() }
    }
}

/// `Q(t+1) = max{0, Q(t) + λ(t)·π(t) − λ̄}`.
pub fn queue_step<S: Scalar>(q: VirtualQueue<S>, lam_t: S, decision: bool, lam_bar: S) -> Result<VirtualQueue<S>> {
    for (name, v) in [("queue length", q.q), ("cost", lam_t), ("average cost", lam_bar)] {
        if !(v >= S::zero()) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let spend = if decision { lam_t } else { S::zero() };
    Ok(VirtualQueue {
        q: (q.q + spend - lam_bar).max(S::zero()),
    })
}

/// Lyapunov drift `½(Q(t+1)² − Q(t)²)`.
pub fn lyapunov_drift<S: Scalar>(q_now: S, q_next: S) -> S {
    S::half() * (q_next * q_next - q_now * q_now)
}
