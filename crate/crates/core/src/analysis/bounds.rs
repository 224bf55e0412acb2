//! Closed-form right-hand sides of the convergence and stability bounds.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Constants entering the convergence bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants<S> {
    pub l_smooth: S,
    pub eta: S,
    /// Bound on the stochastic-gradient variance.
    pub sigma_sq: S,
    /// Loss bound B, absent for unbounded losses.
    pub b_bound: Option<S>,
    /// Minimum per-step update probability of the policy.
    pub p_min: S,
    /// Ground-truth drift magnitudes δ(t).
    pub delta_series: Vec<S>,
}

impl<S: Scalar> TheoremConstants<S> {
    pub fn delta_sup(&self) -> S {
        self.delta_series.iter().copied().fold(S::zero(), S::max)
    }

    /// μ = (η − Lη²/2) · P_min; must be positive.
    pub fn mu(&self) -> Result<S> {
        let mu = (self.eta - S::half() * self.l_smooth * self.eta * self.eta) * self.p_min;
        if !(mu > S::zero()) {
            return Err(Error::invalid(format!(
                "mu = {mu} must be positive (needs eta < 2/L and p_min > 0)"
            )));
        }
        Ok(mu)
    }

    /// `Lη / (2 − Lη) · σ²`.
    pub fn variance_term(&self) -> S {
        let le = self.l_smooth * self.eta;
        le / (S::of(2.0) - le) * self.sigma_sq
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("l_smooth", self.l_smooth),
            ("eta", self.eta),
            ("sigma_sq", self.sigma_sq),
            ("p_min", self.p_min),
        ];
        for (name, v) in fields {
            if !(v >= S::zero()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.p_min > S::zero() && self.p_min <= S::one()) {
            return Err(Error::invalid("p_min must lie in (0, 1]"));
        }
        if self.eta * self.l_smooth >= S::of(2.0) {
            return Err(Error::invalid("eta must be below 2/L"));
        }
        if self.delta_series.iter().any(|&d| !(d >= S::zero())) {
            return Err(Error::invalid("drift magnitudes must be >= 0"));
        }
        Ok(())
    }
}

/// Right-hand side of the convergence bound from the trace quantities
/// `f(θ_0, D_0)`, `f(θ_T, D_T)` and `Σ Δf_δ(t)`.
pub fn convergence_rhs<S: Scalar>(
    horizon: usize,
    initial_loss: S,
    final_loss: S,
    drift_loss_sum: S,
    k: &TheoremConstants<S>,
) -> Result<S> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let mu = k.mu()?;
    let t = S::of(horizon as f64);
    Ok((initial_loss - final_loss + drift_loss_sum) / (t * mu) + k.variance_term())
}

/// The drift-only corollary bound evaluated with the two coefficients in
/// circulation for the `Σ √δ(t)` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryBound<S> {
    /// Coefficient `√(2 ln 2)`.
    pub single: S,
    /// Coefficient `2 √(2 ln 2)`.
    pub doubled: S,
}

impl<S: Scalar> CorollaryBound<S> {
    /// The larger of the two, used for pass/fail decisions.
    pub fn conservative(&self) -> S {
        self.single.max(self.doubled)
    }
}

/// `B / (T μ) (1 + c Σ √δ(t)) + Lη/(2 − Lη) σ²` for both coefficients `c`,
/// summing over the whole `delta_series`.
pub fn corollary_rhs<S: Scalar>(horizon: usize, k: &TheoremConstants<S>) -> Result<CorollaryBound<S>> {
    let b = k
        .b_bound
        .ok_or_else(|| Error::invalid("corollary bound needs a bounded loss"))?;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let mu = k.mu()?;
    let root_sum: S = k.delta_series.iter().map(|d| d.sqrt()).sum();
    let c = S::of((2.0 * LN_2).sqrt());
    let scale = b / (S::of(horizon as f64) * mu);
    let var = k.variance_term();
    Ok(CorollaryBound {
        single: scale * (S::one() + c * root_sum) + var,
        doubled: scale * (S::one() + S::of(2.0) * c * root_sum) + var,
    })
}

/// The stability bound under the two readings of its unindexed δ(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBound<S> {
    /// δ(t) read as sup_t δ(t).
    pub sup: S,
    /// δ(t) read as the time average of δ(t).
    pub mean: S,
    /// Whether either radicand was negative and clamped to zero.
    pub clamped: bool,
}

/// `√( λ̄/T² Σ_{t=1}^{T−1} λ(t) − λ̄/T + 2VB/T (5 + √(2 ln 2 δ)) )`.
pub fn stability_rhs<S: Scalar>(
    horizon: usize,
    costs: &[S],
    lam_bar: S,
    v_weight: S,
    b_bound: S,
    delta_series: &[S],
) -> Result<StabilityBound<S>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    if costs.len() < horizon {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            got: costs.len(),
        });
    }
    let t = S::of(horizon as f64);
    let cost_sum: S = costs[1..horizon].iter().copied().sum();
    let base = lam_bar / (t * t) * cost_sum - lam_bar / t;
    let two_ln2 = S::of(2.0 * LN_2);
    let radical = |delta: S| base + S::of(2.0) * v_weight * b_bound / t * (S::of(5.0) + (two_ln2 * delta).sqrt());
    let sup = delta_series.iter().copied().fold(S::zero(), S::max);
    let mean = if delta_series.is_empty() {
        S::zero()
    } else {
        delta_series.iter().copied().sum::<S>() / S::of(delta_series.len() as f64)
    };
    let (r_sup, r_mean) = (radical(sup), radical(mean));
    let clamped = r_sup < S::zero() || r_mean < S::zero();
    if clamped {
        log::warn!("stability bound radicand negative (sup {r_sup}, mean {r_mean}); clamped to 0");
    }
    Ok(StabilityBound {
        sup: r_sup.max(S::zero()).sqrt(),
        mean: r_mean.max(S::zero()).sqrt(),
        clamped,
    })
}

/// `B √(2 ln 2 · δ)`: the drift-induced loss bound implied by Pinsker.
pub fn pinsker_loss_bound<S: Scalar>(b_bound: S, delta: S) -> S {
    b_bound * (S::of(2.0 * LN_2) * delta).sqrt()
}
