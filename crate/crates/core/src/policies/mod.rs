//! Update policies behind one decision interface: the queue-based threshold
//! rule and the Uniform, Periodic, Budget-Increase and Budget-Threshold
//! baselines, plus trivial always/never policies used as references.

mod baselines;
mod estimator;
mod history;
mod queue;
mod rccda;

pub use baselines::{
    budget_increase_decide, budget_threshold_decide, periodic_decide, periodic_period,
    uniform_decide, BaselineConfig, TokenBucket,
};
pub use estimator::{estimate_grad_norm, fit_least_squares, EstimatorSpec};
pub use history::{GradientRecord, Histories};
pub use queue::{lyapunov_drift, queue_step, VirtualQueue};
pub use rccda::{
    rccda_decide, rccda_evaluate, threshold_rhs, threshold_terms, CostModel, PolicyConfig,
    ThresholdForm, ThresholdTerms,
};

use rand::Rng;

use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy<S> {
    Rccda(PolicyConfig<S>),
    Uniform(BaselineConfig<S>),
    Periodic(BaselineConfig<S>),
    BudgetIncrease {
        baseline: BaselineConfig<S>,
        bucket_cap: S,
    },
    BudgetThreshold {
        baseline: BaselineConfig<S>,
        bucket_cap: S,
    },
    Never,
    Always,
}

impl<S: Scalar> Policy<S> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Rccda(_) => "rccda",
            Policy::Uniform(_) => "uniform",
            Policy::Periodic(_) => "periodic",
            Policy::BudgetIncrease { .. } => "budget_increase",
            Policy::BudgetThreshold { .. } => "budget_threshold",
            Policy::Never => "never",
            Policy::Always => "always",
        }
    }
}

/// Outcome of one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<S> {
    pub update: bool,
    /// Gradient-norm estimate used by the decision (zero for policies that
    /// do not estimate one).
    pub ghat: S,
}

/// A policy together with the mutable state it carries across steps.
#[derive(Debug, Clone)]
pub struct PolicyState<S> {
    policy: Policy<S>,
    bucket: Option<TokenBucket<S>>,
}

impl<S: Scalar> PolicyState<S> {
    /// `avg_cost` is λ̄; budget policies accrue it every step.
    pub fn new(policy: Policy<S>, avg_cost: S) -> Self {
        let bucket = match &policy {
            Policy::BudgetIncrease { bucket_cap, .. } | Policy::BudgetThreshold { bucket_cap, .. } => {
                Some(TokenBucket::new(avg_cost, *bucket_cap))
            }
            _ => None,
        };
        Self { policy, bucket }
    }

    pub fn policy(&self) -> &Policy<S> {
        &self.policy
    }

    pub fn bucket(&self) -> Option<&TokenBucket<S>> {
        self.bucket.as_ref()
    }

    /// Decides at step `t`. The current loss must already be in `h`.
    pub fn decide<R: Rng + ?Sized>(
        &mut self,
        t: usize,
        h: &Histories<S>,
        q: VirtualQueue<S>,
        lam_t: S,
        rng: &mut R,
    ) -> Result<Decision<S>> {
        if let Some(b) = self.bucket.as_mut() {
            b.accrue();
        }
        let plain = |update| Decision {
            update,
            ghat: S::zero(),
        };
        Ok(match &self.policy {
            Policy::Rccda(cfg) => {
                let f_t = h.last_loss().unwrap_or_else(S::nan);
                let terms = rccda_evaluate(f_t, h, q, cfg, t)?;
                Decision {
                    update: terms.update(),
                    ghat: terms.ghat,
                }
            }
            Policy::Uniform(b) => plain(uniform_decide(rng, b)),
            Policy::Periodic(b) => plain(periodic_decide(t, b)),
            Policy::BudgetIncrease { baseline, .. } => plain(budget_increase_decide(
                h,
                self.bucket.as_ref().expect("bucket"),
                baseline,
                lam_t,
            )),
            Policy::BudgetThreshold { baseline, .. } => plain(budget_threshold_decide(
                h,
                self.bucket.as_ref().expect("bucket"),
                baseline,
                lam_t,
            )),
            Policy::Never => plain(false),
            Policy::Always => plain(true),
        })
    }

    /// Pays for an update from the bucket, if the policy has one.
    pub fn commit(&mut self, update: bool, lam_t: S) {
        if let (true, Some(b)) = (update, self.bucket.as_mut()) {
            b.spend(lam_t);
        }
    }
}
