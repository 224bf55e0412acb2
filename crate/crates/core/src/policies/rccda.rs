//! The drift-plus-penalty threshold rule.
//!
//! At every step the policy compares the urgency of an update,
//! `V (f_t − min H_f) + η L V ĝ`, with the price of spending resources given
//! the current queue backlog, and updates when urgency is at least the price.

use serde::{Deserialize, Serialize};

use super::estimator::{estimate_grad_norm, EstimatorSpec};
use super::history::Histories;
use super::queue::VirtualQueue;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-update resource cost λ(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostModel<S> {
    Constant { lambda: S },
    /// `values[t mod len]`.
    Cyclic { values: Vec<S> },
}

impl<S: Scalar> CostModel<S> {
    pub fn cost(&self, t: usize) -> S {
        match self {
            CostModel::Constant { lambda } => *lambda,
            CostModel::Cyclic { values } => values[t % values.len()],
        }
    }

    pub fn min_cost(&self) -> S {
        match self {
            CostModel::Constant { lambda } => *lambda,
            CostModel::Cyclic { values } => values.iter().copied().fold(S::infinity(), S::min),
        }
    }

    /// Costs must be finite, positive, and strictly above `avg_cost > 0`.
    pub fn validate(&self, avg_cost: S) -> Result<()> {
        if let CostModel::Cyclic { values } = self {
            if values.is_empty() {
                return Err(Error::invalid("cyclic cost needs at least one value"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("costs must be finite"));
            }
        }
        if !(avg_cost > S::zero()) || !avg_cost.is_finite() {
            return Err(Error::invalid("average cost must be positive"));
        }
        if !(self.min_cost() > avg_cost) {
            return Err(Error::invalid(format!(
                "average cost {avg_cost} must be below every per-update cost (min {})",
                self.min_cost()
            )));
        }
        Ok(())
    }
}

/// Which right-hand side of the threshold to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdForm {
    /// `λ(t) Q(t) + ½[λ(t)² − 2 λ̄ λ(t)]`.
    #[default]
    Derivation,
    /// `Q(t) + ½[(λ̄/λ(t))² − ((λ(t) − λ̄)/λ(t))²]`, as printed in the
    /// pseudocode listing.
    AlgorithmLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig<S> {
    pub v_weight: S,
    pub eta: S,
    pub l_smooth: S,
    pub cost: CostModel<S>,
    pub avg_cost: S,
    pub estimator: EstimatorSpec<S>,
    #[serde(default)]
    pub threshold_form: ThresholdForm,
}

impl<S: Scalar> PolicyConfig<S> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("v_weight", self.v_weight), ("eta", self.eta), ("l_smooth", self.l_smooth)] {
            if !(v >= S::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        self.cost.validate(self.avg_cost)?;
        self.estimator.validate()
    }
}

/// Both sides of the threshold inequality at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdTerms<S> {
    pub lhs: S,
    pub rhs: S,
    pub ghat: S,
}

impl<S: Scalar> ThresholdTerms<S> {
    /// Equality updates.
    pub fn update(&self) -> bool {
        self.lhs >= self.rhs
    }
}

/// Right-hand side of the threshold for the chosen form.
pub fn threshold_rhs<S: Scalar>(form: ThresholdForm, q: S, lam_t: S, lam_bar: S) -> S {
    let half = S::half();
    match form {
        ThresholdForm::Derivation => lam_t * q + half * (lam_t * lam_t - S::of(2.0) * lam_bar * lam_t),
        ThresholdForm::AlgorithmLine => {
            let a = lam_bar / lam_t;
            let b = (lam_t - lam_bar) / lam_t;
            q + half * (a * a - b * b)
        }
    }
}

/// Evaluates both sides given an explicit gradient-norm estimate.
pub fn threshold_terms<S: Scalar>(
    f_t: S,
    min_loss: S,
    ghat: S,
    q: VirtualQueue<S>,
    cfg: &PolicyConfig<S>,
    t: usize,
) -> ThresholdTerms<S> {
    let v = cfg.v_weight;
    let lhs = v * (f_t - min_loss) + cfg.eta * cfg.l_smooth * v * ghat;
    let rhs = threshold_rhs(cfg.threshold_form, q.q, cfg.cost.cost(t), cfg.avg_cost);
    ThresholdTerms { lhs, rhs, ghat }
}

/// Evaluates the threshold with `f_t` already appended to `h`. At `t = 0` no
/// loss difference exists and the estimate is taken as zero.
pub fn rccda_evaluate<S: Scalar>(
    f_t: S,
    h: &Histories<S>,
    q: VirtualQueue<S>,
    cfg: &PolicyConfig<S>,
    t: usize,
) -> Result<ThresholdTerms<S>> {
    if h.losses().len() != t + 1 || h.last_loss() != Some(f_t) {
        return Err(Error::invalid(format!(
            "loss history must end with f_t at step {t} (has {} entries)",
            h.losses().len()
        )));
    }
    let ghat = if t == 0 {
        S::zero()
    } else {
        estimate_grad_norm(&cfg.estimator, h, t)?
    };
    Ok(threshold_terms(f_t, h.running_min_loss(), ghat, q, cfg, t))
}

/// Update decision π(t).
pub fn rccda_decide<S: Scalar>(
    f_t: S,
    h: &Histories<S>,
    q: VirtualQueue<S>,
    cfg: &PolicyConfig<S>,
    t: usize,
) -> Result<bool> {
    rccda_evaluate(f_t, h, q, cfg, t).map(|terms| terms.update())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: f64, eta_l: f64, form: ThresholdForm) -> PolicyConfig<f64> {
        PolicyConfig {
            v_weight: v,
            eta: eta_l,
            l_smooth: 1.0,
            cost: CostModel::Constant { lambda: 1.0 },
            avg_cost: 0.1,
            estimator: EstimatorSpec::LossDiffConstant { k_d: 1.0 },
            threshold_form: form,
        }
    }

    #[test]
    fn zero_weight_never_updates_with_empty_queue() {
        let c = cfg(0.0, 0.1, ThresholdForm::Derivation);
        let terms = threshold_terms(1.0, 0.0, 5.0, VirtualQueue::empty(), &c, 0);
        assert_eq!(terms.lhs, 0.0);
        assert!((terms.rhs - 0.4).abs() < 1e-15);
        assert!(!terms.update());
    }

    #[test]
    fn direct_evaluation_example() {
        // V=10, f_t=1.0, min=0.4, ηL=0.1, ĝ=2, Q=5, λ=1, λ̄=0.1
        let c = cfg(10.0, 0.1, ThresholdForm::Derivation);
        let terms = threshold_terms(1.0, 0.4, 2.0, VirtualQueue::new(5.0).unwrap(), &c, 0);
        assert!((terms.lhs - 8.0).abs() < 1e-12);
        assert!((terms.rhs - 5.4).abs() < 1e-12);
        assert!(terms.update());
    }

    #[test]
    fn at_historical_min_with_no_gradient() {
        let c = cfg(3.0, 0.1, ThresholdForm::Derivation);
        let terms = threshold_terms(0.7, 0.7, 0.0, VirtualQueue::empty(), &c, 4);
        assert!(terms.rhs > 0.0 && !terms.update());
    }

    #[test]
    fn tie_updates() {
        let c = cfg(1.0, 0.0, ThresholdForm::Derivation);
        // lhs = 0.4 = rhs
        let terms = threshold_terms(0.4, 0.0, 0.0, VirtualQueue::empty(), &c, 0);
        assert_eq!(terms.lhs, terms.rhs);
        assert!(terms.update());
    }

    #[test]
    fn algorithm_line_form() {
        // Q + ½[(0.1)² − (0.9)²] = Q − 0.4
        let rhs: f64 = threshold_rhs(ThresholdForm::AlgorithmLine, 2.0, 1.0, 0.1);
        assert!((rhs - 1.6).abs() < 1e-12);
        let rhs: f64 = threshold_rhs(ThresholdForm::Derivation, 2.0, 1.0, 0.1);
        assert!((rhs - 2.4).abs() < 1e-12);
    }

    #[test]
    fn evaluate_checks_history() {
        let c = cfg(1.0, 0.1, ThresholdForm::Derivation);
        let mut h = Histories::new();
        assert!(rccda_evaluate(1.0, &h, VirtualQueue::empty(), &c, 0).is_err());
        h.push_loss(1.0);
        let t0 = rccda_evaluate(1.0, &h, VirtualQueue::empty(), &c, 0).unwrap();
        assert_eq!(t0.ghat, 0.0);
        h.push_loss(1.5);
        let t1 = rccda_evaluate(1.5, &h, VirtualQueue::empty(), &c, 1).unwrap();
        assert_eq!(t1.ghat, 0.5);
        assert!((t1.lhs - (0.5 + 0.1 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn cost_validation() {
        assert!(CostModel::Constant { lambda: 1.0 }.validate(0.1).is_ok());
        assert!(CostModel::Constant { lambda: 0.1 }.validate(0.1).is_err());
        assert!(CostModel::Cyclic { values: vec![1.0, 0.05] }.validate(0.1).is_err());
        assert_eq!(CostModel::Cyclic { values: vec![1.0, 2.0] }.cost(3), 2.0);
    }
}
