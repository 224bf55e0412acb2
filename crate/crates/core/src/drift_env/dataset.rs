use std::borrow::Borrow;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::domain::{DomainSpec, LabeledSample};
use super::schedule::DriftSchedule;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Random streams that drive the data. The pool and the holdout drift with
/// independent substreams derived from the same seed.
#[derive(Debug, Clone)]
pub struct DriftStreams {
    pub pool: ChaCha8Rng,
    pub holdout: ChaCha8Rng,
}

impl DriftStreams {
    pub fn new(seed: u64) -> Self {
        let mut pool = ChaCha8Rng::seed_from_u64(seed);
        pool.set_stream(1);
        let mut holdout = ChaCha8Rng::seed_from_u64(seed);
        holdout.set_stream(2);
        Self { pool, holdout }
    }
}

/// The fixed-size drifting training pool, its holdout, and the exact
/// per-domain composition of the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetState<S> {
    pub pool: Vec<LabeledSample<S>>,
    pub holdout: Vec<LabeledSample<S>>,
    pub composition: Vec<f64>,
    pub t: usize,
    next_id: u64,
}

/// Number of entries replaced when a fraction `rate` of `len` entries drifts.
pub fn replacement_count(rate: f64, len: usize) -> usize {
    // The epsilon keeps products like 0.29 * 100 from flooring to 28.
    (((rate * len as f64) + 1e-9).floor() as usize).min(len)
}

impl<S: Scalar> DatasetState<S> {
    /// A pool and holdout drawn entirely from `source`.
    pub fn new(
        domains: &[DomainSpec<S>],
        source: usize,
        pool_size: usize,
        holdout_size: usize,
        streams: &mut DriftStreams,
    ) -> Result<Self> {
        if pool_size == 0 || holdout_size == 0 {
            return Err(Error::invalid("pool and holdout sizes must be >= 1"));
        }
        let dom = domains
            .get(source)
            .ok_or_else(|| Error::invalid(format!("unknown source domain {source}")))?;
        let mut next_id = 0u64;
        let pool = (0..pool_size)
            .map(|_| {
                next_id += 1;
                dom.sample(&mut streams.pool, next_id - 1)
            })
            .collect();
        let holdout = (0..holdout_size)
            .map(|_| {
                next_id += 1;
                dom.sample(&mut streams.holdout, next_id - 1)
            })
            .collect();
        let mut ds = Self {
            pool,
            holdout,
            composition: vec![0.0; domains.len()],
            t: 0,
            next_id,
        };
        ds.recompute_composition();
        Ok(ds)
    }

    fn recompute_composition(&mut self) {
        self.composition.iter_mut().for_each(|c| *c = 0.0);
        for s in &self.pool {
            self.composition[s.domain] += 1.0;
        }
        let n = self.pool.len() as f64;
        self.composition.iter_mut().for_each(|c| *c /= n);
    }

    pub fn num_domains(&self) -> usize {
        self.composition.len()
    }

    /// Applies the schedule's step `self.t`: replaces uniformly chosen pool
    /// and holdout entries with fresh samples from the incoming domain, then
    /// moves to `t + 1`. A zero rate leaves the data untouched.
    pub fn advance(
        &mut self,
        schedule: &DriftSchedule,
        domains: &[DomainSpec<S>],
        streams: &mut DriftStreams,
    ) -> Result<()> {
        let step = schedule.step(self.t)?;
        if let Some(k) = step.incoming.filter(|_| step.rate > 0.0) {
            let dom = domains
                .get(k)
                .ok_or_else(|| Error::invalid(format!("schedule references unknown domain {k}")))?;
            let mut next_id = self.next_id;
            replace_fraction(&mut self.pool, step.rate, dom, &mut streams.pool, &mut next_id);
            replace_fraction(
                &mut self.holdout,
                step.rate,
                dom,
                &mut streams.holdout,
                &mut next_id,
            );
            self.next_id = next_id;
            self.recompute_composition();
        }
        self.t += 1;
        Ok(())
    }

    /// Uniform sample of `size` pool entries without replacement.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        size: usize,
        rng: &mut R,
    ) -> Result<Vec<&LabeledSample<S>>> {
        sample_without_replacement(&self.pool, size, rng)
    }
}

pub(crate) fn sample_without_replacement<'a, T, R: Rng + ?Sized>(
    items: &'a [T],
    size: usize,
    rng: &mut R,
) -> Result<Vec<&'a T>> {
    if size == 0 || size > items.len() {
        return Err(Error::invalid(format!(
            "batch size {size} outside [1, {}]",
            items.len()
        )));
    }
    Ok(index::sample(rng, items.len(), size)
        .into_iter()
        .map(|i| &items[i])
        .collect())
}

fn replace_fraction<S: Scalar, R: Rng + ?Sized>(
    data: &mut [LabeledSample<S>],
    rate: f64,
    dom: &DomainSpec<S>,
    rng: &mut R,
    next_id: &mut u64,
) {
    let m = replacement_count(rate, data.len());
    if m == 0 {
        return;
    }
    let mut slots = index::sample(rng, data.len(), m).into_vec();
    slots.sort_unstable();
    for i in slots {
        data[i] = dom.sample(rng, *next_id);
        *next_id += 1;
    }
}

/// Mean of `f` over a batch of borrowed samples.
pub(crate) fn batch_mean<S, B, F>(batch: &[B], mut f: F) -> S
where
    S: Scalar,
    B: Borrow<LabeledSample<S>>,
    F: FnMut(&LabeledSample<S>) -> S,
{
    let total: S = batch.iter().map(|b| f(b.borrow())).sum();
    total / S::of(batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift_env::{make_domain, ScheduleKind};

    fn domains() -> Vec<DomainSpec<f64>> {
        (0..3)
            .map(|i| make_domain(i, 2, 2, 2.0, 0.5, 100 + i as u64).unwrap())
            .collect()
    }

    fn burst(rate: f64) -> DriftSchedule {
        DriftSchedule::new(
            ScheduleKind::Burst {
                events: vec![1],
                rates: vec![rate],
                incoming: vec![1],
            },
            10,
        )
        .unwrap()
    }

    #[test]
    fn zero_rate_is_identity() {
        let doms = domains();
        let mut streams = DriftStreams::new(3);
        let mut ds = DatasetState::new(&doms, 0, 100, 20, &mut streams).unwrap();
        let before = ds.clone();
        ds.advance(&burst(0.8), &doms, &mut streams).unwrap();
        assert_eq!(ds.pool, before.pool);
        assert_eq!(ds.holdout, before.holdout);
        assert_eq!(ds.composition, before.composition);
        assert_eq!(ds.t, 1);
    }

    #[test]
    fn burst_composition_counts_exactly() {
        let doms = domains();
        let mut streams = DriftStreams::new(3);
        let mut ds = DatasetState::new(&doms, 0, 100, 20, &mut streams).unwrap();
        assert_eq!(ds.composition, vec![1.0, 0.0, 0.0]);
        let sched = burst(0.8);
        ds.advance(&sched, &doms, &mut streams).unwrap();
        ds.advance(&sched, &doms, &mut streams).unwrap();
        assert!((ds.composition[0] - 0.2).abs() < 1e-12);
        assert!((ds.composition[1] - 0.8).abs() < 1e-12);
        assert_eq!(ds.pool.len(), 100);
        assert_eq!(ds.holdout.len(), 20);
        assert_eq!(ds.holdout.iter().filter(|s| s.domain == 1).count(), 16);
    }

    #[test]
    fn same_seed_same_stream() {
        let doms = domains();
        let sched = burst(0.5);
        let run = || {
            let mut streams = DriftStreams::new(42);
            let mut ds = DatasetState::new(&doms, 0, 50, 10, &mut streams).unwrap();
            for _ in 0..5 {
                ds.advance(&sched, &doms, &mut streams).unwrap();
            }
            ds
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn batch_bounds() {
        let doms = domains();
        let mut streams = DriftStreams::new(1);
        let ds = DatasetState::new(&doms, 0, 30, 5, &mut streams).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ds.sample_batch(0, &mut rng).is_err());
        assert!(ds.sample_batch(31, &mut rng).is_err());
        let all = ds.sample_batch(30, &mut rng).unwrap();
        let mut ids: Vec<u64> = all.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        let mut expect: Vec<u64> = ds.pool.iter().map(|s| s.id).collect();
        expect.sort_unstable();
        assert_eq!(ids, expect);
    }

    #[test]
    fn replacement_count_floors() {
        assert_eq!(replacement_count(0.8, 100), 80);
        assert_eq!(replacement_count(0.29, 100), 29);
        assert_eq!(replacement_count(0.005, 100), 0);
        assert_eq!(replacement_count(1.0, 7), 7);
    }
}
