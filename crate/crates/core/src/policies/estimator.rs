//! Gradient-norm estimators ĝ(H_f, H_g, H_π).
//!
//! The true gradient norm at the decision point is unavailable without a full
//! pass over the data, so the decision rule uses an estimate built from the
//! histories. Estimators that need recorded gradients fall back to the scaled
//! loss difference until the first update has happened.

use serde::{Deserialize, Serialize};

use super::history::Histories;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec<S> {
    /// Norm recorded at the most recent update.
    LastGradient { k_d: S },
    /// `Σ wᵢ ‖∇f‖` over the last `weights.len()` updates, most recent first.
    WeightedPastK { weights: Vec<S>, k_d: S },
    /// `max(0, k_d (f_t − f_{t−1}))`.
    LossDiffConstant { k_d: S },
    /// `max(0, α̂ |f_t − f_{t−1}| + β̂)` with (α̂, β̂) fit by least squares to
    /// the (loss change, gradient norm) pairs seen at update times.
    LossDiffLeastSquares { min_fit_points: usize, k_d: S },
}

impl<S: Scalar> EstimatorSpec<S> {
    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::WeightedPastK { weights, .. } => {
                if weights.is_empty() {
                    return Err(Error::invalid("weighted_past_k needs at least one weight"));
                }
                if weights.iter().any(|&w| w < S::zero()) {
                    return Err(Error::invalid("weighted_past_k weights must be nonnegative"));
                }
                let total: S = weights.iter().copied().sum();
                if (total - S::one()).abs() > S::of(1e-9) {
                    return Err(Error::invalid(format!(
                        "weighted_past_k weights sum to {total}, not 1"
                    )));
                }
            }
            EstimatorSpec::LossDiffLeastSquares { min_fit_points, .. } if *min_fit_points < 2 => {
                return Err(Error::invalid("least squares needs min_fit_points >= 2"));
            }
            _ => {}
        }
        Ok(())
    }

    fn k_d(&self) -> S {
        match self {
            EstimatorSpec::LastGradient { k_d }
            | EstimatorSpec::WeightedPastK { k_d, .. }
            | EstimatorSpec::LossDiffConstant { k_d }
            | EstimatorSpec::LossDiffLeastSquares { k_d, .. } => *k_d,
        }
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`. With no spread in `x`
/// the slope is zero and the intercept is the mean of `y`.
pub fn fit_least_squares<S: Scalar>(points: &[(S, S)]) -> Option<(S, S)> {
    if points.is_empty() {
        return None;
    }
    let n = S::of(points.len() as f64);
    let mx = points.iter().map(|p| p.0).sum::<S>() / n;
    let my = points.iter().map(|p| p.1).sum::<S>() / n;
    let sxx: S = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: S = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= S::epsilon() * (S::one() + mx * mx) * n {
        return Some((S::zero(), my));
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn loss_diff<S: Scalar>(h: &Histories<S>, t: usize) -> Result<S> {
    let l = h.losses();
    match (l.get(t), l.get(t - 1)) {
        (Some(&now), Some(&prev)) => Ok(now - prev),
        _ => Err(Error::invalid(format!(
            "loss history has {} entries, estimator at step {t} needs {}",
            l.len(),
            t + 1
        ))),
    }
}

/// Gradient-norm estimate at step `t ≥ 1`.
pub fn estimate_grad_norm<S: Scalar>(spec: &EstimatorSpec<S>, h: &Histories<S>, t: usize) -> Result<S> {
    if t == 0 {
        return Err(Error::invalid("gradient-norm estimate undefined at t = 0"));
    }
    let diff = loss_diff(h, t)?;
    let fallback = (spec.k_d() * diff).max(S::zero());
    let grads = h.gradients();
    let estimate = match spec {
        EstimatorSpec::LossDiffConstant { .. } => fallback,
        EstimatorSpec::LastGradient { .. } => grads.last().map_or(fallback, |g| g.norm),
        EstimatorSpec::WeightedPastK { weights, .. } => {
            if grads.is_empty() {
                fallback
            } else {
                // fewer than K updates so far: renormalize over what exists
                let used: Vec<(S, S)> = grads
                    .iter()
                    .rev()
                    .zip(weights)
                    .map(|(g, &w)| (w, g.norm))
                    .collect();
                let wsum: S = used.iter().map(|p| p.0).sum();
                if wsum > S::zero() {
                    used.iter().map(|&(w, n)| w * n).sum::<S>() / wsum
                } else {
                    fallback
                }
            }
        }
        EstimatorSpec::LossDiffLeastSquares { min_fit_points, .. } => {
            let pts: Vec<(S, S)> = grads
                .iter()
                .filter_map(|g| g.loss_delta.map(|x| (x, g.norm)))
                .collect();
            if pts.len() >= *min_fit_points {
                let (slope, intercept) = fit_least_squares(&pts).expect("non-empty");
                (slope * diff.abs() + intercept).max(S::zero())
            } else {
                fallback
            }
        }
    };
    Ok(estimate)
}
