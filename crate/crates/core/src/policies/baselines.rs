use rand::Rng;
use serde::{Deserialize, Serialize};

use super::history::Histories;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig<S> {
    /// Target update rate λ̄/λ.
    pub budget_rate: S,
    /// Consecutive loss increases that trigger Budget-Increase.
    pub consec_n: usize,
    /// Loss window length for Budget-Threshold.
    pub window_len: usize,
    /// Relative jump over the window maximum for Budget-Threshold.
    pub eps: S,
}

impl<S: Scalar> BaselineConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_rate > S::zero() && self.budget_rate < S::one()) {
            return Err(Error::invalid(format!(
                "budget_rate must lie in (0, 1), got {}",
                self.budget_rate
            )));
        }
        if self.consec_n == 0 || self.window_len == 0 {
            return Err(Error::invalid("consec_n and window_len must be >= 1"));
        }
        if !(self.eps > S::zero()) {
            return Err(Error::invalid("eps must be positive"));
        }
        Ok(())
    }
}

/// Token bucket: accrues λ̄ per step up to `cap`, pays λ(t) per update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenBucket<S> {
    pub budget: S,
    pub cap: S,
    pub accrual: S,
}

impl<S: Scalar> TokenBucket<S> {
    pub fn new(accrual: S, cap: S) -> Self {
        Self {
            budget: S::zero(),
            cap,
            accrual,
        }
    }

    pub fn accrue(&mut self) {
        self.budget = (self.budget + self.accrual).min(self.cap);
    }

    /// Repeated accrual of decimal fractions lands a few ulps short of the
    /// exact sum, so affordability allows a relative slack of 1e-9.
    pub fn can_afford(&self, cost: S) -> bool {
        self.budget >= cost - S::of(1e-9) * cost.max(S::one())
    }

    pub fn spend(&mut self, cost: S) {
        self.budget = (self.budget - cost).max(S::zero());
    }
}

/// Bernoulli(budget_rate) draw.
pub fn uniform_decide<S: Scalar, R: Rng + ?Sized>(rng: &mut R, b: &BaselineConfig<S>) -> bool {
    let u: f64 = rng.random();
    u < b.budget_rate.to_real()
}

/// `⌈1 / budget_rate⌉`, tolerant of representation error in the rate.
pub fn periodic_period<S: Scalar>(budget_rate: S) -> usize {
    let inv = 1.0 / budget_rate.to_real();
    let p = (inv - 1e-9 * inv).ceil();
    (p as usize).max(1)
}

/// Updates at every multiple of the period, starting at `t = 0`.
pub fn periodic_decide<S: Scalar>(t: usize, b: &BaselineConfig<S>) -> bool {
    t.is_multiple_of(periodic_period(b.budget_rate))
}

/// Updates when the last `consec_n` loss changes are all increases and the
/// bucket covers `lam_t`. The current loss must already be in `h`.
pub fn budget_increase_decide<S: Scalar>(
    h: &Histories<S>,
    bucket: &TokenBucket<S>,
    b: &BaselineConfig<S>,
    lam_t: S,
) -> bool {
    let l = h.losses();
    if l.len() < b.consec_n + 1 {
        return false;
    }
    let rising = l[l.len() - b.consec_n - 1..].windows(2).all(|w| w[1] > w[0]);
    rising && bucket.can_afford(lam_t)
}

/// Updates when `f_t ≥ (1 + ε) · max(window)` over the previous
/// `window_len` losses and the bucket covers `lam_t`. An empty window never
/// triggers.
pub fn budget_threshold_decide<S: Scalar>(
    h: &Histories<S>,
    bucket: &TokenBucket<S>,
    b: &BaselineConfig<S>,
    lam_t: S,
) -> bool {
    let l = h.losses();
    let Some((&f_t, past)) = l.split_last() else {
        return false;
    };
    if past.is_empty() {
        return false;
    }
    let window = &past[past.len().saturating_sub(b.window_len)..];
    let wmax = window.iter().copied().fold(S::neg_infinity(), S::max);
    f_t >= (S::one() + b.eps) * wmax && bucket.can_afford(lam_t)
}
