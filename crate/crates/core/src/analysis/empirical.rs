//! Measured quantities: drift-induced loss, gradient noise, update
//! frequencies and the discrete Pinsker check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bounds::pinsker_loss_bound;
use super::report::BoundReport;
use crate::drift_env::{discrete_kl, l1_distance, DatasetState};
use crate::error::{Error, Result};
use crate::learner::{full_gradient, grad, pool_loss, LossSpec, ModelParams};
use crate::scalar::{dist_sq, Scalar};

/// `Δf_δ(t) = f(θ, D_{t+1}) − f(θ, D_t)` at fixed parameters. The two specs
/// differ only for the quadratic objective, whose target moves.
pub fn drift_induced_loss<S: Scalar>(
    params: &ModelParams<S>,
    ds_t: &DatasetState<S>,
    ds_next: &DatasetState<S>,
    spec_t: &LossSpec<S>,
    spec_next: &LossSpec<S>,
) -> Result<S> {
    Ok(pool_loss(params, ds_next, spec_next)? - pool_loss(params, ds_t, spec_t)?)
}

/// Checks `B · ½‖P − Q‖₁ ≤ B √(2 ln 2 · KL(P‖Q))` for two discrete
/// distributions, KL in nats. The left side is the largest expectation gap
/// of a `[0, B]`-valued function.
pub fn pinsker_check<S: Scalar>(p: &[S], q: &[S], b_bound: S) -> Result<BoundReport> {
    let tv = S::half() * l1_distance(p, q)?;
    let kl = discrete_kl(p, q)?;
    Ok(BoundReport::new("pinsker", b_bound * tv, pinsker_loss_bound(b_bound, kl)))
}

/// [`pinsker_check`] on `trials` random pairs of distributions over
/// `support` points, with weights drawn uniformly and normalized.
pub fn pinsker_battery(trials: usize, support: usize, b_bound: f64, seed: u64) -> Result<Vec<BoundReport>> {
    if support < 2 {
        return Err(Error::invalid("support must have at least two points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    let draw = |rng: &mut ChaCha8Rng| {
        let raw: Vec<f64> = (0..support).map(|_| rng.random::<f64>() + 1e-12).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    (0..trials)
        .map(|i| {
            let (p, q) = (draw(rng), draw(rng));
            let mut r = pinsker_check(&p, &q, b_bound)?;
            r.name = format!("pinsker_random[{i}]");
            Ok(r)
        })
        .collect()
}

/// Checks one observed drift-induced loss against its Pinsker bound.
pub fn pinsker_step_check<S: Scalar>(t: usize, drift_loss: S, delta: S, b_bound: S) -> BoundReport {
    BoundReport::new(format!("pinsker_step[t={t}]"), drift_loss, pinsker_loss_bound(b_bound, delta))
}

/// Monte-Carlo estimate of `E‖∇f(θ; ξ) − ∇f(θ; D)‖²` for batches of
/// `batch_size` drawn without replacement. Zero when the batch covers the
/// whole pool.
pub fn measure_sigma_sq<S: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<S>,
    ds: &DatasetState<S>,
    spec: &LossSpec<S>,
    batch_size: usize,
    trials: usize,
    rng: &mut R,
) -> Result<S> {
    if trials == 0 || batch_size == 0 {
        return Err(Error::invalid("trials and batch_size must be >= 1"));
    }
    if batch_size >= ds.pool.len() {
        return Ok(S::zero());
    }
    let full = full_gradient(params, ds, spec)?;
    let mut acc = S::zero();
    for _ in 0..trials {
        let batch = ds.sample_batch(batch_size, rng)?;
        acc = acc + dist_sq(&grad(params, &batch, spec)?, &full);
    }
    Ok(acc / S::of(trials as f64))
}

/// Per-step update frequency across seeds: `decisions[s][t]` is seed `s`'s
/// decision at step `t`.
pub fn update_frequency(decisions: &[Vec<bool>]) -> Result<Vec<f64>> {
    let first = decisions.first().ok_or(Error::EmptyBatch)?;
    let horizon = first.len();
    if decisions.iter().any(|d| d.len() != horizon) {
        return Err(Error::invalid("decision traces differ in length"));
    }
    let n = decisions.len() as f64;
    Ok((0..horizon)
        .map(|t| decisions.iter().filter(|d| d[t]).count() as f64 / n)
        .collect())
}

/// Smallest per-step update frequency, floored at `floor`.
pub fn measure_p_min(decisions: &[Vec<bool>], floor: f64) -> Result<f64> {
    let freq = update_frequency(decisions)?;
    let m = freq.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if m.is_finite() { m.max(floor) } else { floor })
}

/// `(1/T) Σ λ(t) π(t) − λ̄`.
pub fn constraint_violation<S: Scalar>(costs: &[S], decisions: &[bool], lam_bar: S) -> Result<S> {
    if costs.len() != decisions.len() {
        return Err(Error::DimensionMismatch {
            expected: decisions.len(),
            got: costs.len(),
        });
    }
    if decisions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let spent: S = costs
        .iter()
        .zip(decisions)
        .filter(|(_, &d)| d)
        .map(|(&c, _)| c)
        .sum();
    Ok(spent / S::of(decisions.len() as f64) - lam_bar)
}

/// Queue recursion bound: `Q(T)/T ≥ (1/T) Σ λ(t) π(t) − λ̄`.
pub fn queue_bound_check<S: Scalar>(final_queue: S, horizon: usize, violation: S) -> BoundReport {
    BoundReport::new("queue_bound", violation, final_queue / S::of(horizon as f64))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn pinsker_on_simple_pair() {
        let r = pinsker_check(&[0.5, 0.5], &[0.9, 0.1], 2.0).unwrap();
        assert!(r.satisfied);
        assert!((r.lhs - 0.8).abs() < 1e-12);
        let same = pinsker_check(&[0.3, 0.7], &[0.3, 0.7], 1.0).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert_eq!(same.rhs, 0.0);
    }

    #[test]
    fn pinsker_unsupported_is_infinite_rhs() {
        let r = pinsker_check(&[0.5, 0.5], &[1.0, 0.0], 1.0).unwrap();
        assert!(r.rhs.is_infinite() && r.satisfied);
    }

    #[test]
    fn random_battery_holds() {
        let reports = pinsker_battery(200, 10, 1.0, 9).unwrap();
        assert_eq!(reports.len(), 200);
        assert!(reports.iter().all(|r| r.satisfied && r.lhs > 0.0));
    }

    #[test]
    fn violation_and_frequency() {
        let d = vec![true, false, false, true];
        let v: f64 = constraint_violation(&[1.0, 1.0, 2.0, 2.0], &d, 0.5).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let f = update_frequency(&[d.clone(), vec![false; 4]]).unwrap();
        assert_eq!(f, vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(measure_p_min(&[d, vec![false; 4]], 0.01).unwrap(), 0.01);
        assert!(constraint_violation(&[1.0], &[true, false], 0.1).is_err());
    }

    #[test]
    fn sigma_zero_for_full_batch() {
        use crate::drift_env::{make_domain, DriftStreams};
        let doms = vec![make_domain::<f64>(0, 2, 2, 2.0, 0.5, 1).unwrap()];
        let ds = DatasetState::new(&doms, 0, 20, 5, &mut DriftStreams::new(1)).unwrap();
        let spec = LossSpec::classifier(2, 2);
        let p = ModelParams::from_vec(vec![0.3, -0.2, 0.1, 0.4, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(measure_sigma_sq(&p, &ds, &spec, 20, 10, &mut rng).unwrap(), 0.0);
        assert!(measure_sigma_sq(&p, &ds, &spec, 2, 50, &mut rng).unwrap() > 0.0);
    }
}
